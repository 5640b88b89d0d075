#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "msae/activation_store.hpp"
#include "msae/sae.hpp"

namespace msae {

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t epochs = 20;
    std::size_t batch_size = 8;
    double l1_lambda = 0.01;
    double grad_clip_norm = 1.0;
    std::uint64_t seed = 42;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    // Initializes b_dec to the training-row mean so reconstruction starts at the centroid.
    bool center_inputs = false;
};

void validate(const TrainConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);
// Overlays keys present in `j` onto `cfg`; unknown keys are rejected.
void merge_json(TrainConfig& cfg, const nlohmann::json& j);

// Adam moments over a flat parameter vector. The optimizer keeps a float64
// master copy of the parameters; the float32 model is refreshed from it.
struct AdamState {
    std::vector<double> params;
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;

    static AdamState for_params(std::vector<double> params);
};

// Clips `grads` in place to global L2 norm cfg.grad_clip_norm, then applies one
// bias-corrected Adam update. Returns the gradient norm before clipping.
double adam_step(AdamState& state, std::span<double> grads, const TrainConfig& cfg);

// Same update applied to an SAE: state.params is written back into `model`.
double adam_step(SaeModel& model, AdamState& state, GradientSet& grads, const TrainConfig& cfg);

struct EpochStats {
    double mse = 0.0;
    double l1_term = 0.0;
    double total_loss = 0.0;

    bool operator==(const EpochStats&) const = default;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    double final_mse = 0.0;
    double wall_time_seconds = 0.0;

    // Compares the deterministic fields; wall time is excluded.
    bool same_result(const TrainReport& other) const {
        return epochs == other.epochs && final_mse == other.final_mse;
    }
};

nlohmann::json to_json(const TrainReport& report);

struct TrainResult {
    SaeModel model;
    TrainReport report;
};

// Per-epoch full-dataset statistics are recorded after each epoch, so
// final_mse is the full-dataset MSE of the returned model.
TrainResult train(const MatrixF& data, std::size_t hidden_dim, const TrainConfig& cfg);
TrainResult train(const ActivationDataset& ds, std::size_t hidden_dim, const TrainConfig& cfg);
TrainResult train(const ActivationDataset& ds, std::span<const std::size_t> rows, std::size_t hidden_dim,
                  const TrainConfig& cfg);

// Seed used for the expert of `domain`: cfg.seed mixed with a hash of the name.
std::uint64_t expert_seed(std::uint64_t seed, const std::string& domain);

struct ExpertSet {
    std::vector<std::string> domains;  // split order
    std::map<std::string, TrainResult> experts;
};

// One independent SAE per domain on that domain's rows (ground-truth routing).
// `jobs` bounds the number of experts trained concurrently.
ExpertSet train_modular(const ActivationDataset& ds, const DatasetSplit& split, std::size_t hidden_dim,
                        const TrainConfig& cfg, std::size_t jobs = 1);

// MSAEMDL1: magic, u32 version, u32 D, u32 H, float32 blocks w_enc, b_enc,
// w_dec, b_dec, u64 FNV-1a checksum over the parameter bytes. Little-endian.
std::vector<std::uint8_t> encode_model(const SaeModel& m);
SaeModel decode_model(const std::vector<std::uint8_t>& bytes);
void save_model(const SaeModel& m, const std::filesystem::path& path);
SaeModel load_model(const std::filesystem::path& path);

}  // namespace msae
