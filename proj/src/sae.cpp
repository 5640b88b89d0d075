#include "msae/sae.hpp"

#include <cmath>
#include <string>

#include "msae/error.hpp"
#include "msae/rng.hpp"

namespace msae {

namespace {

// Fixed-order four-way dot product; the split accumulators keep the sum
// deterministic while removing the single dependency chain.
double dot(const float* a, const double* b, std::size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
        s0 += static_cast<double>(a[k]) * b[k];
        s1 += static_cast<double>(a[k + 1]) * b[k + 1];
        s2 += static_cast<double>(a[k + 2]) * b[k + 2];
        s3 += static_cast<double>(a[k + 3]) * b[k + 3];
    }
    for (; k < n; ++k) s0 += static_cast<double>(a[k]) * b[k];
    return (s0 + s1) + (s2 + s3);
}

void check_input(const SaeModel& m, std::size_t cols) {
    if (cols != m.input_dim)
        throw ShapeMismatch("input width " + std::to_string(cols) + " does not match model input_dim " +
                            std::to_string(m.input_dim));
}

// Forward pass of one row, keeping the intermediates backprop needs.
struct RowPass {
    std::vector<double> x;
    std::vector<double> pre;
    std::vector<double> h;
    std::vector<std::size_t> active;
    std::vector<double> xhat;

    RowPass(std::size_t d, std::size_t hdim) : x(d), pre(hdim), h(hdim), xhat(d) { active.reserve(hdim); }

    void run(const SaeModel& m, std::span<const float> row) {
        const std::size_t d = m.input_dim;
        const std::size_t hd = m.hidden_dim;
        for (std::size_t k = 0; k < d; ++k) x[k] = row[k];
        active.clear();
        for (std::size_t j = 0; j < hd; ++j) {
            pre[j] = static_cast<double>(m.b_enc[j]) + dot(&m.w_enc[j * d], x.data(), d);
            h[j] = pre[j] > 0.0 ? pre[j] : 0.0;
            if (pre[j] > 0.0) active.push_back(j);
        }
        for (std::size_t i = 0; i < d; ++i) {
            const float* wrow = &m.w_dec[i * hd];
            double acc = m.b_dec[i];
            for (std::size_t j : active) acc += static_cast<double>(wrow[j]) * h[j];
            xhat[i] = acc;
        }
    }
};

std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    return rows;
}

}  // namespace

SaeModel init_model(std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed) {
    if (input_dim == 0 || hidden_dim == 0) throw InvalidArgument("model dimensions must be >= 1");
    SaeModel m;
    m.input_dim = input_dim;
    m.hidden_dim = hidden_dim;
    m.w_enc.resize(hidden_dim * input_dim);
    m.b_enc.assign(hidden_dim, 0.0f);
    m.w_dec.resize(input_dim * hidden_dim);
    m.b_dec.assign(input_dim, 0.0f);

    Rng enc_rng(derive_seed(seed, "init:w_enc"));
    const double enc_bound = 1.0 / std::sqrt(static_cast<double>(input_dim));
    for (auto& w : m.w_enc) w = static_cast<float>(enc_rng.uniform(-enc_bound, enc_bound));
    Rng dec_rng(derive_seed(seed, "init:w_dec"));
    const double dec_bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    for (auto& w : m.w_dec) w = static_cast<float>(dec_rng.uniform(-dec_bound, dec_bound));
    return m;
}

void validate(const SaeModel& m) {
    const std::size_t d = m.input_dim, h = m.hidden_dim;
    if (d == 0 || h == 0) throw ShapeMismatch("model dimensions must be >= 1");
    if (m.w_enc.size() != h * d || m.b_enc.size() != h || m.w_dec.size() != d * h || m.b_dec.size() != d)
        throw ShapeMismatch("parameter block sizes inconsistent with (D, H)");
    for (const auto* block : {&m.w_enc, &m.b_enc, &m.w_dec, &m.b_dec}) {
        for (float v : *block) {
            if (!std::isfinite(v)) throw NonFiniteValue("model parameter is not finite");
        }
    }
}

FeatureActivations encode(const SaeModel& m, const MatrixF& x, std::string model_tag) {
    check_input(m, x.cols());
    FeatureActivations fa{MatrixF(x.rows(), m.hidden_dim), std::move(model_tag)};
    std::vector<double> xr(m.input_dim);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto row = x.row(r);
        for (std::size_t k = 0; k < m.input_dim; ++k) xr[k] = row[k];
        auto out = fa.values.row(r);
        for (std::size_t j = 0; j < m.hidden_dim; ++j) {
            const double pre = static_cast<double>(m.b_enc[j]) + dot(&m.w_enc[j * m.input_dim], xr.data(), m.input_dim);
            out[j] = pre > 0.0 ? static_cast<float>(pre) : 0.0f;
        }
    }
    return fa;
}

std::vector<float> encode(const SaeModel& m, std::span<const float> x) {
    MatrixF one(1, x.size(), std::vector<float>(x.begin(), x.end()));
    const auto fa = encode(m, one);
    return {fa.values.values().begin(), fa.values.values().end()};
}

MatrixF decode(const SaeModel& m, const MatrixF& h) {
    if (h.cols() != m.hidden_dim)
        throw ShapeMismatch("feature width " + std::to_string(h.cols()) + " does not match model hidden_dim " +
                            std::to_string(m.hidden_dim));
    MatrixF out(h.rows(), m.input_dim);
    for (std::size_t r = 0; r < h.rows(); ++r) {
        const auto hr = h.row(r);
        for (std::size_t i = 0; i < m.input_dim; ++i) {
            double acc = m.b_dec[i];
            for (std::size_t j = 0; j < m.hidden_dim; ++j)
                acc += static_cast<double>(m.w_dec[i * m.hidden_dim + j]) * hr[j];
            out(r, i) = static_cast<float>(acc);
        }
    }
    return out;
}

LossValue loss(const SaeModel& m, const MatrixF& x, double l1_lambda, std::span<const std::size_t> rows) {
    check_input(m, x.cols());
    std::vector<std::size_t> every;
    if (rows.empty()) {
        every = all_rows(x.rows());
        rows = every;
    }
    if (rows.empty()) throw EmptyDataset("loss needs a nonempty batch");
    RowPass pass(m.input_dim, m.hidden_dim);
    double sq = 0.0, act = 0.0;
    for (std::size_t r : rows) {
        pass.run(m, x.row(r));
        for (std::size_t i = 0; i < m.input_dim; ++i) {
            const double e = pass.xhat[i] - pass.x[i];
            sq += e * e;
        }
        for (std::size_t j : pass.active) act += pass.h[j];
    }
    const double b = static_cast<double>(rows.size());
    LossValue lv;
    lv.mse = sq / (b * static_cast<double>(m.input_dim));
    lv.l1 = act / b;
    lv.total = lv.mse + l1_lambda * lv.l1;
    return lv;
}

std::span<double> GradientSet::w_enc() { return {values.data(), hidden_dim * input_dim}; }
std::span<double> GradientSet::b_enc() { return {values.data() + ParamLayout(input_dim, hidden_dim).b_enc_offset(), hidden_dim}; }
std::span<double> GradientSet::w_dec() { return {values.data() + ParamLayout(input_dim, hidden_dim).w_dec_offset(), input_dim * hidden_dim}; }
std::span<double> GradientSet::b_dec() { return {values.data() + ParamLayout(input_dim, hidden_dim).b_dec_offset(), input_dim}; }
std::span<const double> GradientSet::w_enc() const { return const_cast<GradientSet*>(this)->w_enc(); }
std::span<const double> GradientSet::b_enc() const { return const_cast<GradientSet*>(this)->b_enc(); }
std::span<const double> GradientSet::w_dec() const { return const_cast<GradientSet*>(this)->w_dec(); }
std::span<const double> GradientSet::b_dec() const { return const_cast<GradientSet*>(this)->b_dec(); }

GradientSet gradients(const SaeModel& m, const MatrixF& x, double l1_lambda, std::span<const std::size_t> rows,
                      LossValue* loss_out) {
    check_input(m, x.cols());
    std::vector<std::size_t> every;
    if (rows.empty()) {
        every = all_rows(x.rows());
        rows = every;
    }
    if (rows.empty()) throw EmptyDataset("gradients need a nonempty batch");

    const std::size_t d = m.input_dim, hd = m.hidden_dim;
    GradientSet g{d, hd, std::vector<double>(ParamLayout(d, hd).size(), 0.0)};
    auto gw_enc = g.w_enc();
    auto gb_enc = g.b_enc();
    auto gw_dec = g.w_dec();
    auto gb_dec = g.b_dec();

    const double b = static_cast<double>(rows.size());
    const double recon_scale = 2.0 / (b * static_cast<double>(d));
    const double l1_grad = l1_lambda / b;

    RowPass pass(d, hd);
    std::vector<double> g_out(d);
    double sq = 0.0, act = 0.0;
    for (std::size_t r : rows) {
        pass.run(m, x.row(r));
        for (std::size_t i = 0; i < d; ++i) {
            const double e = pass.xhat[i] - pass.x[i];
            sq += e * e;
            g_out[i] = recon_scale * e;
            gb_dec[i] += g_out[i];
        }
        for (std::size_t j : pass.active) {
            act += pass.h[j];
            double g_h = l1_grad;
            for (std::size_t i = 0; i < d; ++i) {
                g_h += static_cast<double>(m.w_dec[i * hd + j]) * g_out[i];
                gw_dec[i * hd + j] += g_out[i] * pass.h[j];
            }
            gb_enc[j] += g_h;
            double* row = &gw_enc[j * d];
            for (std::size_t k = 0; k < d; ++k) row[k] += g_h * pass.x[k];
        }
    }
    if (loss_out) {
        loss_out->mse = sq / (b * static_cast<double>(d));
        loss_out->l1 = act / b;
        loss_out->total = loss_out->mse + l1_lambda * loss_out->l1;
    }
    return g;
}

std::vector<double> flatten_params(const SaeModel& m) {
    std::vector<double> flat;
    flat.reserve(ParamLayout(m.input_dim, m.hidden_dim).size());
    for (const auto* block : {&m.w_enc, &m.b_enc, &m.w_dec, &m.b_dec}) flat.insert(flat.end(), block->begin(), block->end());
    return flat;
}

void assign_params(SaeModel& m, std::span<const double> flat) {
    if (flat.size() != ParamLayout(m.input_dim, m.hidden_dim).size())
        throw ShapeMismatch("flat parameter vector has wrong length");
    std::size_t k = 0;
    for (auto* block : {&m.w_enc, &m.b_enc, &m.w_dec, &m.b_dec}) {
        for (auto& v : *block) v = static_cast<float>(flat[k++]);
    }
}

}  // namespace msae
