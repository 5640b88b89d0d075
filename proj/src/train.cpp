#include "msae/train.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include "msae/error.hpp"
#include "msae/parallel.hpp"
#include "msae/rng.hpp"

namespace msae {

void validate(const TrainConfig& cfg) {
    if (!(cfg.learning_rate > 0.0)) throw InvalidArgument("learning_rate must be > 0");
    if (cfg.epochs == 0) throw InvalidArgument("epochs must be >= 1");
    if (cfg.batch_size == 0) throw InvalidArgument("batch_size must be >= 1");
    if (!(cfg.l1_lambda >= 0.0)) throw InvalidArgument("l1_lambda must be >= 0");
    if (!(cfg.grad_clip_norm > 0.0)) throw InvalidArgument("grad_clip_norm must be > 0");
    if (!(cfg.adam_beta1 >= 0.0 && cfg.adam_beta1 < 1.0) || !(cfg.adam_beta2 >= 0.0 && cfg.adam_beta2 < 1.0))
        throw InvalidArgument("adam betas must lie in [0, 1)");
    if (!(cfg.adam_eps > 0.0)) throw InvalidArgument("adam_eps must be > 0");
}

nlohmann::json to_json(const TrainConfig& cfg) {
    return {{"learning_rate", cfg.learning_rate}, {"epochs", cfg.epochs},
            {"batch_size", cfg.batch_size},       {"l1_lambda", cfg.l1_lambda},
            {"grad_clip_norm", cfg.grad_clip_norm}, {"seed", cfg.seed},
            {"adam_beta1", cfg.adam_beta1},       {"adam_beta2", cfg.adam_beta2},
            {"adam_eps", cfg.adam_eps},           {"center_inputs", cfg.center_inputs},
            {"l1_convention", "mean over rows of summed hidden activations"},
            {"mse_convention", "mean over all elements"}};
}

void merge_json(TrainConfig& cfg, const nlohmann::json& j) {
    if (!j.is_object()) throw InvalidArgument("train config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key == "learning_rate") cfg.learning_rate = value.get<double>();
        else if (key == "epochs") cfg.epochs = value.get<std::size_t>();
        else if (key == "batch_size") cfg.batch_size = value.get<std::size_t>();
        else if (key == "l1_lambda") cfg.l1_lambda = value.get<double>();
        else if (key == "grad_clip_norm") cfg.grad_clip_norm = value.get<double>();
        else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
        else if (key == "adam_beta1") cfg.adam_beta1 = value.get<double>();
        else if (key == "adam_beta2") cfg.adam_beta2 = value.get<double>();
        else if (key == "adam_eps") cfg.adam_eps = value.get<double>();
        else if (key == "center_inputs") cfg.center_inputs = value.get<bool>();
        else if (key == "l1_convention" || key == "mse_convention") continue;
        else throw InvalidArgument("unknown train config key '" + key + "'");
    }
}

AdamState AdamState::for_params(std::vector<double> params) {
    AdamState s;
    s.m.assign(params.size(), 0.0);
    s.v.assign(params.size(), 0.0);
    s.params = std::move(params);
    return s;
}

double adam_step(AdamState& state, std::span<double> grads, const TrainConfig& cfg) {
    if (grads.size() != state.params.size()) throw ShapeMismatch("gradient length does not match optimizer state");
    double sq = 0.0;
    for (double g : grads) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > cfg.grad_clip_norm) {
        const double scale = cfg.grad_clip_norm / norm;
        for (double& g : grads) g *= scale;
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bias1 = 1.0 - std::pow(cfg.adam_beta1, t);
    const double bias2 = 1.0 - std::pow(cfg.adam_beta2, t);
    for (std::size_t i = 0; i < grads.size(); ++i) {
        const double g = grads[i];
        state.m[i] = cfg.adam_beta1 * state.m[i] + (1.0 - cfg.adam_beta1) * g;
        state.v[i] = cfg.adam_beta2 * state.v[i] + (1.0 - cfg.adam_beta2) * g * g;
        const double m_hat = state.m[i] / bias1;
        const double v_hat = state.v[i] / bias2;
        state.params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
    return norm;
}

double adam_step(SaeModel& model, AdamState& state, GradientSet& grads, const TrainConfig& cfg) {
    const double norm = adam_step(state, grads.values, cfg);
    assign_params(model, state.params);
    return norm;
}

nlohmann::json to_json(const TrainReport& report) {
    nlohmann::json epochs = nlohmann::json::array();
    for (std::size_t e = 0; e < report.epochs.size(); ++e) {
        const auto& s = report.epochs[e];
        epochs.push_back({{"epoch", e + 1}, {"mse", s.mse}, {"l1_term", s.l1_term}, {"total_loss", s.total_loss}});
    }
    return {{"epochs", epochs}, {"final_mse", report.final_mse}, {"wall_time_seconds", report.wall_time_seconds}};
}

TrainResult train(const ActivationDataset& ds, std::span<const std::size_t> rows, std::size_t hidden_dim,
                  const TrainConfig& cfg) {
    validate(cfg);
    if (rows.empty() || ds.rows() == 0) throw EmptyDataset("training needs at least one row");
    if (cfg.batch_size > rows.size())
        throw InvalidArgument("batch_size " + std::to_string(cfg.batch_size) + " exceeds row count " +
                              std::to_string(rows.size()));
    const auto start = std::chrono::steady_clock::now();
    const std::size_t d = ds.dim();
    const MatrixF& x = ds.data;

    TrainResult result{init_model(d, hidden_dim, derive_seed(cfg.seed, "init")), {}};
    SaeModel& model = result.model;
    if (cfg.center_inputs) {
        std::vector<double> mean(d, 0.0);
        for (std::size_t r : rows) {
            const auto row = x.row(r);
            for (std::size_t k = 0; k < d; ++k) mean[k] += row[k];
        }
        for (std::size_t k = 0; k < d; ++k) model.b_dec[k] = static_cast<float>(mean[k] / static_cast<double>(rows.size()));
    }
    AdamState state = AdamState::for_params(flatten_params(model));

    std::vector<std::size_t> order(rows.size());
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto perm = random_permutation(rows.size(), derive_seed(cfg.seed, "epoch:" + std::to_string(epoch)));
        for (std::size_t i = 0; i < perm.size(); ++i) order[i] = rows[perm[i]];
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            const std::span<const std::size_t> batch(order.data() + begin, end - begin);
            GradientSet g = gradients(model, x, cfg.l1_lambda, batch);
            adam_step(model, state, g, cfg);
        }
        const LossValue lv = loss(model, x, cfg.l1_lambda, rows);
        result.report.epochs.push_back({lv.mse, lv.l1, lv.total});
    }
    result.report.final_mse = result.report.epochs.back().mse;
    result.report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

TrainResult train(const ActivationDataset& ds, std::size_t hidden_dim, const TrainConfig& cfg) {
    std::vector<std::size_t> rows(ds.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return train(ds, rows, hidden_dim, cfg);
}

TrainResult train(const MatrixF& data, std::size_t hidden_dim, const TrainConfig& cfg) {
    ActivationDataset ds;
    ds.data = data;
    return train(ds, hidden_dim, cfg);
}

std::uint64_t expert_seed(std::uint64_t seed, const std::string& domain) {
    return derive_seed(seed, "expert:" + domain);
}

ExpertSet train_modular(const ActivationDataset& ds, const DatasetSplit& split, std::size_t hidden_dim,
                        const TrainConfig& cfg, std::size_t jobs) {
    if (split.empty()) throw EmptyDomain("split has no domains");
    for (const auto& part : split) {
        if (part.rows.empty()) throw EmptyDomain("domain '" + part.domain + "' has no rows");
    }
    std::vector<TrainResult> results(split.size());
    parallel_for(split.size(), jobs, [&](std::size_t i) {
        TrainConfig local = cfg;
        local.seed = expert_seed(cfg.seed, split[i].domain);
        results[i] = train(ds, split[i].rows, hidden_dim, local);
    });
    ExpertSet set;
    for (std::size_t i = 0; i < split.size(); ++i) {
        set.domains.push_back(split[i].domain);
        set.experts.emplace(split[i].domain, std::move(results[i]));
    }
    return set;
}

namespace {

constexpr char kModelMagic[8] = {'M', 'S', 'A', 'E', 'M', 'D', 'L', '1'};
constexpr std::uint32_t kModelVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

}  // namespace

std::vector<std::uint8_t> encode_model(const SaeModel& m) {
    validate(m);
    std::vector<std::uint8_t> out(std::begin(kModelMagic), std::end(kModelMagic));
    put_u32(out, kModelVersion);
    put_u32(out, static_cast<std::uint32_t>(m.input_dim));
    put_u32(out, static_cast<std::uint32_t>(m.hidden_dim));
    const std::size_t start = out.size();
    for (const auto* block : {&m.w_enc, &m.b_enc, &m.w_dec, &m.b_dec}) {
        for (float f : *block) put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
    const std::uint64_t sum = fnv1a64(out.data() + start, out.size() - start);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(sum >> (8 * i)));
    return out;
}

SaeModel decode_model(const std::vector<std::uint8_t>& bytes) {
    constexpr std::size_t header = 8 + 3 * 4;
    if (bytes.size() < header || std::memcmp(bytes.data(), kModelMagic, 8) != 0)
        throw MalformedFile("missing MSAEMDL1 magic");
    const std::uint32_t version = get_u32(bytes.data() + 8);
    if (version != kModelVersion) throw MalformedFile("unsupported MSAEMDL version " + std::to_string(version));
    SaeModel m;
    m.input_dim = get_u32(bytes.data() + 12);
    m.hidden_dim = get_u32(bytes.data() + 16);
    const std::size_t count = ParamLayout(m.input_dim, m.hidden_dim).size();
    if (bytes.size() != header + 4 * count + 8) throw ShapeMismatch("model payload does not match declared (D, H)");
    const std::uint8_t* p = bytes.data() + header;
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(p[4 * count + i]) << (8 * i);
    if (fnv1a64(p, 4 * count) != stored) throw MalformedFile("model checksum mismatch");

    m.w_enc.resize(m.hidden_dim * m.input_dim);
    m.b_enc.resize(m.hidden_dim);
    m.w_dec.resize(m.input_dim * m.hidden_dim);
    m.b_dec.resize(m.input_dim);
    for (auto* block : {&m.w_enc, &m.b_enc, &m.w_dec, &m.b_dec}) {
        for (auto& f : *block) {
            f = std::bit_cast<float>(get_u32(p));
            p += 4;
        }
    }
    validate(m);
    return m;
}

void save_model(const SaeModel& m, const std::filesystem::path& path) {
    const auto bytes = encode_model(m);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoFailure("write to '" + path.string() + "' failed");
}

SaeModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_model(bytes);
}

}  // namespace msae
