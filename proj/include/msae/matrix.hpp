#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace msae {

// Dense row-major matrix with value semantics.
template <class T>
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<T> values)
        : rows_(rows), cols_(cols), values_(std::move(values)) {
        values_.resize(rows * cols);
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return values_.empty(); }

    T& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    std::span<T> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
    std::span<const T> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

    std::span<T> values() { return values_; }
    std::span<const T> values() const { return values_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> values_;
};

using MatrixF = Matrix<float>;
using MatrixD = Matrix<double>;

}  // namespace msae
