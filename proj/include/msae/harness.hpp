#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "msae/activation_store.hpp"
#include "msae/metrics.hpp"
#include "msae/sae.hpp"
#include "msae/train.hpp"

namespace msae::harness {

enum class ConditionKind { monolithic, modular, capacity_matched };

std::string to_string(ConditionKind kind);
ConditionKind parse_condition(const std::string& name);  // accepts "capacity-matched" too

struct ConditionSpec {
    ConditionKind kind = ConditionKind::monolithic;
    std::size_t hidden_dim = 256;
    TrainConfig train;
    metrics::MetricConfig metrics;
};

struct TrainingTrace {
    std::string name;  // "monolithic" or the expert's domain
    std::uint64_t seed = 0;
    TrainReport report;
};

struct ConditionResult {
    ConditionKind kind = ConditionKind::monolithic;
    std::size_t hidden_dim = 0;
    std::uint64_t seed = 0;
    std::optional<metrics::StabilityResult> stability;  // absent for capacity_matched
    std::optional<double> entropy;                      // absent for modular
    std::vector<double> entropy_per_domain;
    double mse = 0.0;
    metrics::SparsityStats sparsity;
    std::vector<TrainingTrace> training;

    // In-memory artifacts; not serialized.
    FeatureActivations features;
    std::map<std::string, SaeModel> models;
};

// Encodes every row with the expert of its domain.
FeatureActivations encode_routed(const std::map<std::string, SaeModel>& experts, const ActivationDataset& ds);

// Trains per spec, encodes the training rows, and computes sparsity, MSE and
// (per condition kind) within-domain stability and domain-feature entropy.
ConditionResult run_condition(const ActivationDataset& ds, const ConditionSpec& spec, std::size_t jobs = 1);

// Metric block for already-trained models (used by the CLI's eval path).
ConditionResult evaluate_condition(const ActivationDataset& ds, ConditionKind kind,
                                   std::map<std::string, SaeModel> models, const metrics::MetricConfig& cfg);

struct ComparisonConfig {
    std::uint64_t master_seed = 42;
    TrainConfig train;  // seed is ignored; every job derives its own from master_seed
    metrics::MetricConfig metrics;
    std::size_t monolithic_hidden = 256;
    std::size_t expert_hidden = 64;
    std::size_t capacity_hidden = 64;
    std::size_t shuffle_runs = 100;
    std::size_t routing_runs = 10;
    std::size_t n_seeds = 5;
    bool include_capacity_matched = true;
    std::size_t jobs = 1;  // scheduling only; never affects results
};

nlohmann::json to_json(const ComparisonConfig& cfg);  // excludes jobs
void merge_json(ComparisonConfig& cfg, const nlohmann::json& j);

// Seed for a named role ("monolithic", "modular", "capacity_matched",
// "shuffle", "routing", "multiseed").
std::uint64_t role_seed(std::uint64_t master_seed, const std::string& role);

struct ComparisonReport {
    std::vector<std::string> domains;
    std::vector<ConditionResult> conditions;
    metrics::EntropyResult shuffled_entropy;
    metrics::SpecializationResult random_routing;
    metrics::MultiSeedResult multi_seed;
    std::vector<double> stability_delta_pp;  // per domain, modular - monolithic, x100
    double overall_delta_pp = 0.0;
    ComparisonConfig config;
    std::uint64_t dataset_checksum = 0;
    std::size_t dataset_rows = 0;
    std::size_t dataset_dim = 0;
    std::vector<std::size_t> domain_counts;
    nlohmann::json dataset_meta;

    const ConditionResult* find(ConditionKind kind) const;
};

// Runs monolithic, modular and (optionally) capacity-matched conditions plus the
// shuffled-label entropy baseline, random-routing specialization baseline and
// multi-seed stability. Deterministic in (dataset, config minus jobs).
ComparisonReport run_full_comparison(const ActivationDataset& ds, const ComparisonConfig& cfg);

}  // namespace msae::harness
