#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "msae/activation_store.hpp"
#include "msae/sae.hpp"
#include "msae/train.hpp"

namespace msae::metrics {

struct MetricConfig {
    double active_eps = 1e-6;
    std::size_t top_k_per_sample = 10;
    std::size_t top_k_global = 50;
    std::size_t top_k_domain = 25;

    bool operator==(const MetricConfig&) const = default;
};

// Throws InvalidArgument unless every k lies in [1, hidden_dim] and active_eps > 0.
void validate(const MetricConfig& cfg, std::size_t hidden_dim);
nlohmann::json to_json(const MetricConfig& cfg);
void merge_json(MetricConfig& cfg, const nlohmann::json& j);

// Sorted, duplicate-free feature indices.
using FeatureSet = std::vector<std::size_t>;

FeatureSet active_set(std::span<const float> row, double eps);

// Features ranked by activation (descending, ties to the lower index),
// restricted to activations above eps, truncated to k.
FeatureSet top_k_features(std::span<const float> row, std::size_t k, double eps);

struct SparsityStats {
    double mean_active = 0.0;
    double sparsity_fraction = 0.0;
};

SparsityStats sparsity_stats(const FeatureActivations& fa, const MetricConfig& cfg);

// |a & b| / |a | b| over sorted sets; 1.0 when both are empty.
double jaccard(const FeatureSet& a, const FeatureSet& b);

struct StabilityResult {
    std::vector<std::string> domains;
    std::vector<double> per_domain;
    double overall = 0.0;

    double at(const std::string& domain) const;
};

// Mean pairwise Jaccard of active sets among rows of each domain; overall is
// the unweighted mean over domains. Throws DomainTooSmall for domains with < 2 rows.
StabilityResult within_domain_stability(const FeatureActivations& fa, const std::vector<std::string>& labels,
                                        const std::vector<std::string>& domains, const MetricConfig& cfg);

// Shannon entropy (nats) of the per-domain frequency distribution of features
// appearing in per-sample top-k sets. Empty distributions have entropy 0.
std::vector<double> per_domain_entropy(const FeatureActivations& fa, const std::vector<std::string>& labels,
                                       const std::vector<std::string>& domains, const MetricConfig& cfg);
// Unweighted mean of per_domain_entropy.
double domain_feature_entropy(const FeatureActivations& fa, const std::vector<std::string>& labels,
                              const std::vector<std::string>& domains, const MetricConfig& cfg);

// Add-one permutation p-value for a "lower is more extreme" statistic:
// (1 + #{null <= observed}) / (1 + runs).
double permutation_p_value(double observed, std::span<const double> null_values);

struct BaselineStats {
    double mean = 0.0;
    double std = 0.0;  // population
};
BaselineStats mean_std(std::span<const double> values);

struct EntropyResult {
    double observed = 0.0;
    double baseline_mean = 0.0;
    double baseline_std = 0.0;
    double p_value = 1.0;
    std::size_t runs = 0;
    std::vector<double> null_values;
};

// Shuffle r uses seed derive_seed(seed, "shuffle:<r>").
EntropyResult shuffled_entropy_baseline(const FeatureActivations& fa, const std::vector<std::string>& labels,
                                        const std::vector<std::string>& domains, const MetricConfig& cfg,
                                        std::size_t runs, std::uint64_t seed, std::size_t jobs = 1);

// Per-domain top_k_domain features by frequency in per-sample top-k sets
// (ties to the lower index; zero-frequency features never qualify).
std::vector<FeatureSet> domain_top_sets(const FeatureActivations& fa, const std::vector<std::string>& labels,
                                        const std::vector<std::string>& domains, const MetricConfig& cfg);
// Fraction of the union of sets that belongs to exactly one set; 0 for an empty union.
double exclusive_fraction(const std::vector<FeatureSet>& sets);
double specialization(const FeatureActivations& fa_shared, const std::vector<std::string>& labels,
                      const std::vector<std::string>& domains, const MetricConfig& cfg);

struct SpecializationResult {
    double observed_fraction = 0.0;
    double baseline_mean = 0.0;
    double baseline_std = 0.0;
    std::size_t runs = 0;
    std::vector<double> null_values;
};

// Run r uses seed derive_seed(seed, "routing:<r>").
SpecializationResult random_routing_baseline(const FeatureActivations& fa_shared,
                                             const std::vector<std::string>& labels,
                                             const std::vector<std::string>& domains, const MetricConfig& cfg,
                                             std::size_t runs, std::uint64_t seed, std::size_t jobs = 1);

// Top k features by mean activation over all rows (above eps, ties to the lower index).
FeatureSet global_top_features(const FeatureActivations& fa, std::size_t k, double eps);

struct MultiSeedResult {
    double mean = 0.0;
    double std = 0.0;
    std::vector<std::uint64_t> seeds;
    std::vector<double> pair_values;  // (0,1), (0,2), ..., (1,2), ...
};

// Seed i is derive_seed(train_cfg.seed, "multiseed:<i>").
std::vector<std::uint64_t> multi_seed_seeds(std::uint64_t seed, std::size_t n_seeds);
MultiSeedResult multi_seed_stability(const ActivationDataset& ds, std::size_t hidden_dim,
                                     const TrainConfig& train_cfg, const MetricConfig& cfg,
                                     std::span<const std::uint64_t> seeds, std::size_t jobs = 1);
MultiSeedResult multi_seed_stability(const ActivationDataset& ds, std::size_t hidden_dim,
                                     const TrainConfig& train_cfg, const MetricConfig& cfg,
                                     std::size_t n_seeds = 5, std::size_t jobs = 1);
// Pairwise Jaccard statistics over already-computed top sets.
MultiSeedResult pairwise_set_stability(const std::vector<FeatureSet>& sets);

// Mean elementwise squared reconstruction error over all rows.
double reconstruction_mse(const SaeModel& m, const MatrixF& data);
// Each row reconstructed by its own domain's expert; pooled over all rows.
double reconstruction_mse(const std::map<std::string, SaeModel>& experts, const ActivationDataset& ds);

// Versioned metric record: {schema_version, metric, value, config, baseline?}.
nlohmann::json metric_record(const std::string& metric, const nlohmann::json& value, const MetricConfig& cfg,
                             const std::optional<nlohmann::json>& baseline = std::nullopt);

}  // namespace msae::metrics
