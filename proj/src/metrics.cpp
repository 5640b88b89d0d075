#include "msae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "msae/error.hpp"
#include "msae/parallel.hpp"
#include "msae/rng.hpp"

namespace msae::metrics {

namespace {

// Row lists per domain in `domains` order.
std::vector<std::vector<std::size_t>> rows_by_domain(const std::vector<std::string>& labels,
                                                     const std::vector<std::string>& domains, std::size_t n) {
    if (labels.size() != n)
        throw ShapeMismatch("label count " + std::to_string(labels.size()) + " does not match activation rows " +
                            std::to_string(n));
    std::vector<std::vector<std::size_t>> out;
    for (const auto& part : split_by_labels(labels, domains)) out.push_back(part.rows);
    return out;
}

// Highest-scoring indices with score > floor, ties to the lower index.
FeatureSet rank_top(std::span<const double> scores, std::size_t k, double floor) {
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < scores.size(); ++j) {
        if (scores[j] > floor) idx.push_back(j);
    }
    const std::size_t keep = std::min(k, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep), idx.end(),
                      [&](std::size_t a, std::size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); });
    idx.resize(keep);
    std::sort(idx.begin(), idx.end());
    return idx;
}

double shannon_entropy(std::span<const std::size_t> counts) {
    std::size_t total = 0;
    for (auto c : counts) total += c;
    if (total == 0) return 0.0;
    double h = 0.0;
    for (auto c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log(p);
    }
    return h;
}

std::vector<std::size_t> top_k_counts(const FeatureActivations& fa, std::span<const std::size_t> rows,
                                      const MetricConfig& cfg) {
    std::vector<std::size_t> counts(fa.features(), 0);
    for (std::size_t r : rows) {
        for (std::size_t j : top_k_features(fa.values.row(r), cfg.top_k_per_sample, cfg.active_eps)) ++counts[j];
    }
    return counts;
}

}  // namespace

void validate(const MetricConfig& cfg, std::size_t hidden_dim) {
    if (!(cfg.active_eps > 0.0)) throw InvalidArgument("active_eps must be > 0");
    for (auto [name, k] : {std::pair{"top_k_per_sample", cfg.top_k_per_sample},
                           std::pair{"top_k_global", cfg.top_k_global},
                           std::pair{"top_k_domain", cfg.top_k_domain}}) {
        if (k < 1 || k > hidden_dim)
            throw InvalidArgument(std::string(name) + " = " + std::to_string(k) + " must lie in [1, " +
                                  std::to_string(hidden_dim) + "]");
    }
}

nlohmann::json to_json(const MetricConfig& cfg) {
    return {{"active_eps", cfg.active_eps},
            {"top_k_per_sample", cfg.top_k_per_sample},
            {"top_k_global", cfg.top_k_global},
            {"top_k_domain", cfg.top_k_domain},
            {"entropy_log_base", "e"}};
}

void merge_json(MetricConfig& cfg, const nlohmann::json& j) {
    if (!j.is_object()) throw InvalidArgument("metric config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key == "active_eps") cfg.active_eps = value.get<double>();
        else if (key == "top_k_per_sample") cfg.top_k_per_sample = value.get<std::size_t>();
        else if (key == "top_k_global") cfg.top_k_global = value.get<std::size_t>();
        else if (key == "top_k_domain") cfg.top_k_domain = value.get<std::size_t>();
        else if (key == "entropy_log_base") {
            if (value != "e") throw InvalidArgument("entropy_log_base is fixed to natural log (\"e\")");
        } else throw InvalidArgument("unknown metric config key '" + key + "'");
    }
}

FeatureSet active_set(std::span<const float> row, double eps) {
    FeatureSet out;
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (row[j] > eps) out.push_back(j);
    }
    return out;
}

FeatureSet top_k_features(std::span<const float> row, std::size_t k, double eps) {
    std::vector<double> scores(row.begin(), row.end());
    return rank_top(scores, k, eps);
}

SparsityStats sparsity_stats(const FeatureActivations& fa, const MetricConfig& cfg) {
    if (fa.rows() == 0 || fa.features() == 0) throw EmptyDataset("sparsity needs a nonempty activation matrix");
    std::size_t total = 0;
    for (std::size_t r = 0; r < fa.rows(); ++r) total += active_set(fa.values.row(r), cfg.active_eps).size();
    SparsityStats s;
    s.mean_active = static_cast<double>(total) / static_cast<double>(fa.rows());
    s.sparsity_fraction = s.mean_active / static_cast<double>(fa.features());
    return s;
}

double jaccard(const FeatureSet& a, const FeatureSet& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t inter = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) ++ia;
        else if (*ib < *ia) ++ib;
        else {
            ++inter;
            ++ia;
            ++ib;
        }
    }
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

double StabilityResult::at(const std::string& domain) const {
    for (std::size_t i = 0; i < domains.size(); ++i) {
        if (domains[i] == domain) return per_domain[i];
    }
    throw InvalidArgument("no stability entry for domain '" + domain + "'");
}

StabilityResult within_domain_stability(const FeatureActivations& fa, const std::vector<std::string>& labels,
                                        const std::vector<std::string>& domains, const MetricConfig& cfg) {
    const auto groups = rows_by_domain(labels, domains, fa.rows());
    StabilityResult result;
    result.domains = domains;
    for (std::size_t d = 0; d < domains.size(); ++d) {
        const auto& rows = groups[d];
        if (rows.size() < 2)
            throw DomainTooSmall("domain '" + domains[d] + "' has " + std::to_string(rows.size()) +
                                 " rows; stability needs at least 2");
        std::vector<FeatureSet> sets;
        sets.reserve(rows.size());
        for (std::size_t r : rows) sets.push_back(active_set(fa.values.row(r), cfg.active_eps));
        double sum = 0.0;
        std::size_t pairs = 0;
        for (std::size_t i = 0; i < sets.size(); ++i) {
            for (std::size_t j = i + 1; j < sets.size(); ++j) {
                sum += jaccard(sets[i], sets[j]);
                ++pairs;
            }
        }
        result.per_domain.push_back(sum / static_cast<double>(pairs));
    }
    double total = 0.0;
    for (double v : result.per_domain) total += v;
    result.overall = domains.empty() ? 0.0 : total / static_cast<double>(domains.size());
    return result;
}

std::vector<double> per_domain_entropy(const FeatureActivations& fa, const std::vector<std::string>& labels,
                                       const std::vector<std::string>& domains, const MetricConfig& cfg) {
    const auto groups = rows_by_domain(labels, domains, fa.rows());
    std::vector<double> out;
    out.reserve(groups.size());
    for (const auto& rows : groups) {
        const auto counts = top_k_counts(fa, rows, cfg);
        out.push_back(shannon_entropy(counts));
    }
    return out;
}

double domain_feature_entropy(const FeatureActivations& fa, const std::vector<std::string>& labels,
                              const std::vector<std::string>& domains, const MetricConfig& cfg) {
    const auto per = per_domain_entropy(fa, labels, domains, cfg);
    if (per.empty()) return 0.0;
    double sum = 0.0;
    for (double v : per) sum += v;
    return sum / static_cast<double>(per.size());
}

double permutation_p_value(double observed, std::span<const double> null_values) {
    std::size_t count = 0;
    for (double v : null_values) count += (v <= observed);
    return static_cast<double>(1 + count) / static_cast<double>(1 + null_values.size());
}

BaselineStats mean_std(std::span<const double> values) {
    if (values.empty()) return {};
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) sq += (v - mean) * (v - mean);
    return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

EntropyResult shuffled_entropy_baseline(const FeatureActivations& fa, const std::vector<std::string>& labels,
                                        const std::vector<std::string>& domains, const MetricConfig& cfg,
                                        std::size_t runs, std::uint64_t seed, std::size_t jobs) {
    if (runs < 1) throw InvalidArgument("shuffled baseline needs runs >= 1");
    EntropyResult result;
    result.runs = runs;
    result.observed = domain_feature_entropy(fa, labels, domains, cfg);
    result.null_values.assign(runs, 0.0);
    parallel_for(runs, jobs, [&](std::size_t r) {
        const auto shuffled = shuffle_labels(labels, derive_seed(seed, "shuffle:" + std::to_string(r)));
        result.null_values[r] = domain_feature_entropy(fa, shuffled, domains, cfg);
    });
    const auto stats = mean_std(result.null_values);
    result.baseline_mean = stats.mean;
    result.baseline_std = stats.std;
    result.p_value = permutation_p_value(result.observed, result.null_values);
    return result;
}

std::vector<FeatureSet> domain_top_sets(const FeatureActivations& fa, const std::vector<std::string>& labels,
                                        const std::vector<std::string>& domains, const MetricConfig& cfg) {
    const auto groups = rows_by_domain(labels, domains, fa.rows());
    std::vector<FeatureSet> sets;
    for (const auto& rows : groups) {
        const auto counts = top_k_counts(fa, rows, cfg);
        std::vector<double> scores(counts.begin(), counts.end());
        sets.push_back(rank_top(scores, cfg.top_k_domain, 0.0));
    }
    return sets;
}

double exclusive_fraction(const std::vector<FeatureSet>& sets) {
    std::map<std::size_t, std::size_t> membership;
    for (const auto& s : sets) {
        for (std::size_t j : s) ++membership[j];
    }
    if (membership.empty()) return 0.0;
    std::size_t unique = 0;
    for (const auto& [feature, count] : membership) unique += (count == 1);
    return static_cast<double>(unique) / static_cast<double>(membership.size());
}

double specialization(const FeatureActivations& fa_shared, const std::vector<std::string>& labels,
                      const std::vector<std::string>& domains, const MetricConfig& cfg) {
    return exclusive_fraction(domain_top_sets(fa_shared, labels, domains, cfg));
}

SpecializationResult random_routing_baseline(const FeatureActivations& fa_shared,
                                             const std::vector<std::string>& labels,
                                             const std::vector<std::string>& domains, const MetricConfig& cfg,
                                             std::size_t runs, std::uint64_t seed, std::size_t jobs) {
    if (runs < 1) throw InvalidArgument("random routing baseline needs runs >= 1");
    SpecializationResult result;
    result.runs = runs;
    result.observed_fraction = specialization(fa_shared, labels, domains, cfg);
    result.null_values.assign(runs, 0.0);
    parallel_for(runs, jobs, [&](std::size_t r) {
        const auto routed = shuffle_labels(labels, derive_seed(seed, "routing:" + std::to_string(r)));
        result.null_values[r] = specialization(fa_shared, routed, domains, cfg);
    });
    const auto stats = mean_std(result.null_values);
    result.baseline_mean = stats.mean;
    result.baseline_std = stats.std;
    return result;
}

FeatureSet global_top_features(const FeatureActivations& fa, std::size_t k, double eps) {
    std::vector<double> mean(fa.features(), 0.0);
    for (std::size_t r = 0; r < fa.rows(); ++r) {
        const auto row = fa.values.row(r);
        for (std::size_t j = 0; j < row.size(); ++j) mean[j] += row[j];
    }
    if (fa.rows() > 0) {
        for (auto& m : mean) m /= static_cast<double>(fa.rows());
    }
    return rank_top(mean, k, eps);
}

std::vector<std::uint64_t> multi_seed_seeds(std::uint64_t seed, std::size_t n_seeds) {
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < n_seeds; ++i) seeds.push_back(derive_seed(seed, "multiseed:" + std::to_string(i)));
    return seeds;
}

MultiSeedResult pairwise_set_stability(const std::vector<FeatureSet>& sets) {
    MultiSeedResult result;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        for (std::size_t j = i + 1; j < sets.size(); ++j) result.pair_values.push_back(jaccard(sets[i], sets[j]));
    }
    const auto stats = mean_std(result.pair_values);
    result.mean = stats.mean;
    result.std = stats.std;
    return result;
}

MultiSeedResult multi_seed_stability(const ActivationDataset& ds, std::size_t hidden_dim,
                                     const TrainConfig& train_cfg, const MetricConfig& cfg,
                                     std::span<const std::uint64_t> seeds, std::size_t jobs) {
    if (seeds.size() < 2) throw InvalidArgument("multi-seed stability needs at least 2 seeds");
    validate(cfg, hidden_dim);
    std::vector<FeatureSet> tops(seeds.size());
    parallel_for(seeds.size(), jobs, [&](std::size_t i) {
        TrainConfig local = train_cfg;
        local.seed = seeds[i];
        const auto trained = train(ds, hidden_dim, local);
        tops[i] = global_top_features(encode(trained.model, ds.data), cfg.top_k_global, cfg.active_eps);
    });
    auto result = pairwise_set_stability(tops);
    result.seeds.assign(seeds.begin(), seeds.end());
    return result;
}

MultiSeedResult multi_seed_stability(const ActivationDataset& ds, std::size_t hidden_dim,
                                     const TrainConfig& train_cfg, const MetricConfig& cfg, std::size_t n_seeds,
                                     std::size_t jobs) {
    const auto seeds = multi_seed_seeds(train_cfg.seed, n_seeds);
    return multi_seed_stability(ds, hidden_dim, train_cfg, cfg, seeds, jobs);
}

double reconstruction_mse(const SaeModel& m, const MatrixF& data) {
    return loss(m, data, 0.0).mse;
}

double reconstruction_mse(const std::map<std::string, SaeModel>& experts, const ActivationDataset& ds) {
    if (ds.rows() == 0) throw EmptyDataset("reconstruction needs rows");
    double sq = 0.0;
    for (const auto& part : split_by_domain(ds)) {
        if (part.rows.empty()) continue;
        const auto it = experts.find(part.domain);
        if (it == experts.end()) throw InvalidArgument("no expert for domain '" + part.domain + "'");
        sq += loss(it->second, ds.data, 0.0, part.rows).mse * static_cast<double>(part.rows.size());
    }
    return sq / static_cast<double>(ds.rows());
}

nlohmann::json metric_record(const std::string& metric, const nlohmann::json& value, const MetricConfig& cfg,
                             const std::optional<nlohmann::json>& baseline) {
    nlohmann::json j = {{"schema_version", 1}, {"metric", metric}, {"value", value}, {"config", to_json(cfg)}};
    if (baseline) j["baseline"] = *baseline;
    return j;
}

}  // namespace msae::metrics
