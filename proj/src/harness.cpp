#include "msae/harness.hpp"

#include <algorithm>

#include "msae/error.hpp"
#include "msae/parallel.hpp"
#include "msae/rng.hpp"

namespace msae::harness {

std::string to_string(ConditionKind kind) {
    switch (kind) {
        case ConditionKind::monolithic: return "monolithic";
        case ConditionKind::modular: return "modular";
        case ConditionKind::capacity_matched: return "capacity_matched";
    }
    return "unknown";
}

ConditionKind parse_condition(const std::string& name) {
    if (name == "monolithic") return ConditionKind::monolithic;
    if (name == "modular") return ConditionKind::modular;
    if (name == "capacity_matched" || name == "capacity-matched") return ConditionKind::capacity_matched;
    throw InvalidArgument("unknown condition '" + name + "'");
}

FeatureActivations encode_routed(const std::map<std::string, SaeModel>& experts, const ActivationDataset& ds) {
    if (experts.empty()) throw InvalidArgument("no experts given");
    const std::size_t hidden = experts.begin()->second.hidden_dim;
    for (const auto& [domain, m] : experts) {
        if (m.hidden_dim != hidden) throw ShapeMismatch("experts disagree on hidden_dim");
    }
    FeatureActivations fa{MatrixF(ds.rows(), hidden), "modular"};
    for (const auto& part : split_by_domain(ds)) {
        if (part.rows.empty()) continue;
        const auto it = experts.find(part.domain);
        if (it == experts.end()) throw InvalidArgument("no expert for domain '" + part.domain + "'");
        const auto encoded = encode(it->second, ds.data);
        // Only the domain's own rows are kept; the rest of `encoded` is discarded.
        for (std::size_t r : part.rows) {
            const auto src = encoded.values.row(r);
            std::copy(src.begin(), src.end(), fa.values.row(r).begin());
        }
    }
    return fa;
}

ConditionResult evaluate_condition(const ActivationDataset& ds, ConditionKind kind,
                                   std::map<std::string, SaeModel> models, const metrics::MetricConfig& cfg) {
    ConditionResult result;
    result.kind = kind;
    if (kind == ConditionKind::modular) {
        result.features = encode_routed(models, ds);
        result.mse = metrics::reconstruction_mse(models, ds);
    } else {
        if (models.size() != 1) throw InvalidArgument("monolithic conditions take exactly one model");
        const SaeModel& m = models.begin()->second;
        result.features = encode(m, ds.data, to_string(kind));
        result.mse = metrics::reconstruction_mse(m, ds.data);
    }
    result.hidden_dim = result.features.features();
    metrics::validate(cfg, result.hidden_dim);
    result.sparsity = metrics::sparsity_stats(result.features, cfg);
    if (kind != ConditionKind::capacity_matched)
        result.stability = metrics::within_domain_stability(result.features, ds.labels, ds.domains, cfg);
    if (kind != ConditionKind::modular) {
        result.entropy_per_domain = metrics::per_domain_entropy(result.features, ds.labels, ds.domains, cfg);
        result.entropy = metrics::domain_feature_entropy(result.features, ds.labels, ds.domains, cfg);
    }
    result.models = std::move(models);
    return result;
}

ConditionResult run_condition(const ActivationDataset& ds, const ConditionSpec& spec, std::size_t jobs) {
    validate(ds);
    metrics::validate(spec.metrics, spec.hidden_dim);
    std::map<std::string, SaeModel> models;
    std::vector<TrainingTrace> traces;
    if (spec.kind == ConditionKind::modular) {
        if (ds.domains.size() < 2) throw InvalidArgument("modular condition needs at least 2 domains");
        auto experts = train_modular(ds, split_by_domain(ds), spec.hidden_dim, spec.train, jobs);
        for (const auto& domain : experts.domains) {
            auto& trained = experts.experts.at(domain);
            traces.push_back({domain, expert_seed(spec.train.seed, domain), trained.report});
            models.emplace(domain, std::move(trained.model));
        }
    } else {
        auto trained = train(ds, spec.hidden_dim, spec.train);
        traces.push_back({to_string(spec.kind), spec.train.seed, trained.report});
        models.emplace(to_string(spec.kind), std::move(trained.model));
    }
    auto result = evaluate_condition(ds, spec.kind, std::move(models), spec.metrics);
    result.seed = spec.train.seed;
    result.training = std::move(traces);
    return result;
}

nlohmann::json to_json(const ComparisonConfig& cfg) {
    auto train = to_json(cfg.train);
    train.erase("seed");
    return {{"master_seed", cfg.master_seed},
            {"train", train},
            {"metrics", metrics::to_json(cfg.metrics)},
            {"monolithic_hidden", cfg.monolithic_hidden},
            {"expert_hidden", cfg.expert_hidden},
            {"capacity_hidden", cfg.capacity_hidden},
            {"shuffle_runs", cfg.shuffle_runs},
            {"routing_runs", cfg.routing_runs},
            {"n_seeds", cfg.n_seeds},
            {"include_capacity_matched", cfg.include_capacity_matched}};
}

void merge_json(ComparisonConfig& cfg, const nlohmann::json& j) {
    if (!j.is_object()) throw InvalidArgument("comparison config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key == "master_seed" || key == "seed") cfg.master_seed = value.get<std::uint64_t>();
        else if (key == "train") merge_json(cfg.train, value);
        else if (key == "metrics") metrics::merge_json(cfg.metrics, value);
        else if (key == "monolithic_hidden") cfg.monolithic_hidden = value.get<std::size_t>();
        else if (key == "expert_hidden") cfg.expert_hidden = value.get<std::size_t>();
        else if (key == "capacity_hidden") cfg.capacity_hidden = value.get<std::size_t>();
        else if (key == "shuffle_runs") cfg.shuffle_runs = value.get<std::size_t>();
        else if (key == "routing_runs") cfg.routing_runs = value.get<std::size_t>();
        else if (key == "n_seeds") cfg.n_seeds = value.get<std::size_t>();
        else if (key == "include_capacity_matched") cfg.include_capacity_matched = value.get<bool>();
        else if (key == "jobs") cfg.jobs = value.get<std::size_t>();
        else throw InvalidArgument("unknown config key '" + key + "'");
    }
}

std::uint64_t role_seed(std::uint64_t master_seed, const std::string& role) { return derive_seed(master_seed, role); }

const ConditionResult* ComparisonReport::find(ConditionKind kind) const {
    for (const auto& c : conditions) {
        if (c.kind == kind) return &c;
    }
    return nullptr;
}

ComparisonReport run_full_comparison(const ActivationDataset& ds, const ComparisonConfig& cfg) {
    validate(ds);
    if (ds.domains.size() < 2) throw InvalidArgument("comparison needs a dataset with at least 2 domains");
    if (cfg.n_seeds < 2) throw InvalidArgument("n_seeds must be >= 2");
    validate(cfg.train);
    metrics::validate(cfg.metrics, cfg.monolithic_hidden);
    metrics::validate(cfg.metrics, cfg.expert_hidden);
    if (cfg.include_capacity_matched) metrics::validate(cfg.metrics, cfg.capacity_hidden);

    auto spec_for = [&](ConditionKind kind, std::size_t hidden) {
        ConditionSpec spec{kind, hidden, cfg.train, cfg.metrics};
        spec.train.seed = role_seed(cfg.master_seed, to_string(kind));
        return spec;
    };
    std::vector<ConditionSpec> specs{spec_for(ConditionKind::monolithic, cfg.monolithic_hidden),
                                     spec_for(ConditionKind::modular, cfg.expert_hidden)};
    if (cfg.include_capacity_matched) specs.push_back(spec_for(ConditionKind::capacity_matched, cfg.capacity_hidden));

    const auto seeds = metrics::multi_seed_seeds(role_seed(cfg.master_seed, "multiseed"), cfg.n_seeds);

    // Conditions and multi-seed trainings are independent jobs with fixed slots.
    std::vector<ConditionResult> conditions(specs.size());
    std::vector<metrics::FeatureSet> tops(seeds.size());
    parallel_for(specs.size() + seeds.size(), cfg.jobs, [&](std::size_t task) {
        if (task < specs.size()) {
            conditions[task] = run_condition(ds, specs[task]);
            return;
        }
        const std::size_t i = task - specs.size();
        TrainConfig local = cfg.train;
        local.seed = seeds[i];
        const auto trained = train(ds, cfg.monolithic_hidden, local);
        tops[i] = metrics::global_top_features(encode(trained.model, ds.data), cfg.metrics.top_k_global,
                                               cfg.metrics.active_eps);
    });

    ComparisonReport report;
    report.domains = ds.domains;
    report.config = cfg;
    report.dataset_checksum = payload_checksum(ds.data);
    report.dataset_rows = ds.rows();
    report.dataset_dim = ds.dim();
    report.dataset_meta = ds.meta;
    for (const auto& part : split_by_domain(ds)) report.domain_counts.push_back(part.rows.size());

    report.multi_seed = metrics::pairwise_set_stability(tops);
    report.multi_seed.seeds = seeds;

    const FeatureActivations& shared = conditions[0].features;
    report.shuffled_entropy = metrics::shuffled_entropy_baseline(shared, ds.labels, ds.domains, cfg.metrics,
                                                                 cfg.shuffle_runs,
                                                                 role_seed(cfg.master_seed, "shuffle"), cfg.jobs);
    report.random_routing = metrics::random_routing_baseline(shared, ds.labels, ds.domains, cfg.metrics,
                                                             cfg.routing_runs,
                                                             role_seed(cfg.master_seed, "routing"), cfg.jobs);

    const auto& mono = *conditions[0].stability;
    const auto& modular = *conditions[1].stability;
    for (std::size_t d = 0; d < ds.domains.size(); ++d)
        report.stability_delta_pp.push_back((modular.per_domain[d] - mono.per_domain[d]) * 100.0);
    report.overall_delta_pp = (modular.overall - mono.overall) * 100.0;
    report.conditions = std::move(conditions);
    return report;
}

}  // namespace msae::harness
