#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "msae/matrix.hpp"

namespace msae {

// One sparse autoencoder: h = ReLU(W_enc x + b_enc), x_hat = W_dec h + b_dec.
// Weights are row-major; w_enc is H x D and w_dec is D x H.
struct SaeModel {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    std::vector<float> w_enc;
    std::vector<float> b_enc;
    std::vector<float> w_dec;
    std::vector<float> b_dec;

    bool operator==(const SaeModel&) const = default;
};

// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
SaeModel init_model(std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed);

// Throws ShapeMismatch or NonFiniteValue.
void validate(const SaeModel& m);

// Post-ReLU hidden activations, one row per input row.
struct FeatureActivations {
    MatrixF values;
    std::string model_tag;

    std::size_t rows() const { return values.rows(); }
    std::size_t features() const { return values.cols(); }
};

FeatureActivations encode(const SaeModel& m, const MatrixF& x, std::string model_tag = {});
std::vector<float> encode(const SaeModel& m, std::span<const float> x);
MatrixF decode(const SaeModel& m, const MatrixF& h);

struct LossValue {
    double total = 0.0;
    double mse = 0.0;  // mean over all B*D elements
    double l1 = 0.0;   // mean over rows of the summed hidden activations
};

// `rows` selects batch rows of `x`; an empty selection means every row.
LossValue loss(const SaeModel& m, const MatrixF& x, double l1_lambda,
               std::span<const std::size_t> rows = {});

// Flat parameter-shaped storage in declared order: w_enc, b_enc, w_dec, b_dec.
class ParamLayout {
public:
    ParamLayout(std::size_t input_dim, std::size_t hidden_dim) : d_(input_dim), h_(hidden_dim) {}

    std::size_t w_enc_offset() const { return 0; }
    std::size_t b_enc_offset() const { return h_ * d_; }
    std::size_t w_dec_offset() const { return h_ * d_ + h_; }
    std::size_t b_dec_offset() const { return 2 * h_ * d_ + h_; }
    std::size_t size() const { return 2 * h_ * d_ + h_ + d_; }

private:
    std::size_t d_;
    std::size_t h_;
};

struct GradientSet {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    std::vector<double> values;  // ParamLayout order

    std::span<double> w_enc();
    std::span<double> b_enc();
    std::span<double> w_dec();
    std::span<double> b_dec();
    std::span<const double> w_enc() const;
    std::span<const double> b_enc() const;
    std::span<const double> w_dec() const;
    std::span<const double> b_dec() const;
};

// Analytic gradient of loss().total. ReLU'(0) is taken as 0, so units with
// pre-activation <= 0 pass neither reconstruction nor L1 gradient.
GradientSet gradients(const SaeModel& m, const MatrixF& x, double l1_lambda,
                      std::span<const std::size_t> rows = {}, LossValue* loss_out = nullptr);

// Flattens / restores parameters in ParamLayout order.
std::vector<double> flatten_params(const SaeModel& m);
void assign_params(SaeModel& m, std::span<const double> flat);

}  // namespace msae
