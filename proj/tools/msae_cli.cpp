// msae: command-line front end for synthetic data generation, SAE training,
// metric evaluation and the full monolithic-vs-modular comparison.
//
// Exit codes: 0 success, 1 runtime/numeric failure, 2 usage/config error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "msae/activation_store.hpp"
#include "msae/error.hpp"
#include "msae/harness.hpp"
#include "msae/metrics.hpp"
#include "msae/report.hpp"
#include "msae/synthgen.hpp"
#include "msae/train.hpp"
#include "msae/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Usage/config failures detected after CLI11 parsing.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::uint64_t default_seed() {
    if (const char* env = std::getenv("MSAE_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw UsageError(std::string("MSAE_SEED is not an unsigned integer: '") + env + "'");
        }
    }
    return 42;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw UsageError("config file '" + path + "' is not valid JSON: " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw msae::IoFailure("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw msae::IoFailure("write to '" + path.string() + "' failed");
}

void log_config(const std::string& command, const json& resolved) {
    std::cerr << "[msae " << command << "] resolved config: " << resolved.dump() << "\n";
}

// Flags shared by train/eval/compare. Values stay empty unless given, so the
// config file is applied first and flags win.
struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<double> lr;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> batch_size;
    std::optional<double> l1;
    std::optional<double> clip;
    bool center = false;
    std::optional<double> active_eps;
    std::optional<std::size_t> top_k_per_sample;
    std::optional<std::size_t> top_k_global;
    std::optional<std::size_t> top_k_domain;
    std::size_t jobs = 1;

    void attach(CLI::App* app) {
        app->add_option("--config", config_path, "JSON config file (flags override its values)");
        app->add_option("--seed", seed, "Master seed (default: $MSAE_SEED or 42)");
        app->add_option("--lr", lr, "Adam learning rate");
        app->add_option("--epochs", epochs, "Training epochs");
        app->add_option("--batch-size", batch_size, "Minibatch size");
        app->add_option("--l1", l1, "L1 sparsity coefficient");
        app->add_option("--clip", clip, "Global gradient-norm clip");
        app->add_flag("--center", center, "Initialize the decoder bias at the data mean");
        app->add_option("--active-eps", active_eps, "Activation threshold for 'active'");
        app->add_option("--top-k-sample", top_k_per_sample, "Per-sample top-k");
        app->add_option("--top-k-global", top_k_global, "Global top-k for multi-seed stability");
        app->add_option("--top-k-domain", top_k_domain, "Per-domain top-k for specialization");
        app->add_option("--jobs", jobs, "Worker threads (results never depend on this)")->check(CLI::PositiveNumber);
    }

    msae::harness::ComparisonConfig resolve() const {
        msae::harness::ComparisonConfig cfg;
        cfg.master_seed = default_seed();
        if (!config_path.empty()) {
            try {
                msae::harness::merge_json(cfg, read_json_file(config_path));
            } catch (const json::exception& e) {
                throw UsageError(std::string("bad config value: ") + e.what());
            }
        }
        if (seed) cfg.master_seed = *seed;
        if (lr) cfg.train.learning_rate = *lr;
        if (epochs) cfg.train.epochs = *epochs;
        if (batch_size) cfg.train.batch_size = *batch_size;
        if (l1) cfg.train.l1_lambda = *l1;
        if (clip) cfg.train.grad_clip_norm = *clip;
        if (center) cfg.train.center_inputs = true;
        if (active_eps) cfg.metrics.active_eps = *active_eps;
        if (top_k_per_sample) cfg.metrics.top_k_per_sample = *top_k_per_sample;
        if (top_k_global) cfg.metrics.top_k_global = *top_k_global;
        if (top_k_domain) cfg.metrics.top_k_domain = *top_k_domain;
        cfg.jobs = jobs;
        cfg.train.seed = cfg.master_seed;
        msae::validate(cfg.train);
        return cfg;
    }
};

json dataset_summary(const msae::ActivationDataset& ds) {
    json counts = json::object();
    for (const auto& part : msae::split_by_domain(ds)) counts[part.domain] = part.rows.size();
    return {{"rows", ds.rows()},
            {"dim", ds.dim()},
            {"domains", ds.domains},
            {"domain_counts", counts},
            {"checksum_fnv1a64", msae::report::hex64(msae::payload_checksum(ds.data))}};
}

// ---------------------------------------------------------------------------
// synth

struct SynthCommand {
    bool use_default = false;
    std::string out;
    std::optional<std::size_t> n_per_domain, dim, n_domains, rank;
    std::optional<double> signal_scale, noise_scale, overlap;
    std::optional<std::uint64_t> seed;

    void attach(CLI::App* app) {
        app->add_flag("--default", use_default, "Canonical 4x50, dim 256 benchmark");
        app->add_option("-o,--out", out, "Output MSAEACT file")->required();
        app->add_option("--n-per-domain", n_per_domain);
        app->add_option("--dim", dim);
        app->add_option("--n-domains", n_domains);
        app->add_option("--rank", rank, "Signal directions per domain");
        app->add_option("--signal-scale", signal_scale);
        app->add_option("--noise-scale", noise_scale);
        app->add_option("--overlap", overlap, "Fraction of directions shared across domains");
        app->add_option("--seed", seed);
    }

    int run() const {
        auto spec = msae::synth::default_benchmark_spec();
        if (!use_default) spec.seed = default_seed();
        if (n_per_domain) spec.n_per_domain = *n_per_domain;
        if (dim) spec.dim = *dim;
        if (n_domains) spec.n_domains = *n_domains;
        if (rank) spec.domain_subspace_rank = *rank;
        if (signal_scale) spec.signal_scale = *signal_scale;
        if (noise_scale) spec.noise_scale = *noise_scale;
        if (overlap) spec.overlap = *overlap;
        if (seed) spec.seed = *seed;
        log_config("synth", msae::synth::to_json(spec));
        msae::ActivationDataset ds;
        try {
            ds = msae::synth::generate(spec);
        } catch (const msae::InvalidSpec& e) {
            throw UsageError(std::string("invalid synth spec: ") + e.what());
        }
        msae::save_activations(ds, out);
        std::cout << dataset_summary(ds).dump(2) << "\n";
        return 0;
    }
};

// ---------------------------------------------------------------------------
// train

struct TrainCommand {
    CommonFlags common;
    std::string condition = "monolithic";
    std::optional<std::size_t> hidden;
    std::string data;
    std::string out_dir;

    void attach(CLI::App* app) {
        app->add_option("--condition", condition, "monolithic | modular | capacity-matched")
            ->check(CLI::IsMember({"monolithic", "modular", "capacity-matched", "capacity_matched"}));
        app->add_option("--hidden", hidden, "Hidden width (default 1024 monolithic, 256 otherwise)");
        app->add_option("--data", data, "Activation file (.msaeact or .csv)")->required();
        app->add_option("-o,--out-dir", out_dir, "Directory for model files and train_report.json")->required();
        common.attach(app);
    }

    int run() const {
        const auto kind = msae::harness::parse_condition(condition);
        const auto cfg = common.resolve();
        const std::size_t width = hidden ? *hidden : (kind == msae::harness::ConditionKind::monolithic ? 1024 : 256);
        const json resolved = {{"condition", msae::harness::to_string(kind)},
                               {"hidden_dim", width},
                               {"data", data},
                               {"train", msae::to_json(cfg.train)}};
        log_config("train", resolved);

        const auto ds = msae::load_activations(data);
        fs::create_directories(out_dir);
        json models = json::array();
        if (kind == msae::harness::ConditionKind::modular) {
            if (ds.domains.size() < 2) throw UsageError("modular training needs at least 2 domains");
            const auto experts = msae::train_modular(ds, msae::split_by_domain(ds), width, cfg.train, cfg.jobs);
            for (const auto& domain : experts.domains) {
                const auto& trained = experts.experts.at(domain);
                const fs::path path = fs::path(out_dir) / ("modular." + domain + ".msaemdl");
                msae::save_model(trained.model, path);
                models.push_back({{"domain", domain},
                                  {"path", path.filename().string()},
                                  {"seed", msae::expert_seed(cfg.train.seed, domain)},
                                  {"report", msae::to_json(trained.report)}});
                std::cout << domain << ": final MSE " << trained.report.final_mse << "\n";
            }
        } else {
            const auto trained = msae::train(ds, width, cfg.train);
            const fs::path path = fs::path(out_dir) / (msae::harness::to_string(kind) + ".msaemdl");
            msae::save_model(trained.model, path);
            models.push_back({{"path", path.filename().string()},
                              {"seed", cfg.train.seed},
                              {"report", msae::to_json(trained.report)}});
            std::cout << "final MSE " << trained.report.final_mse << "\n";
        }
        json doc = {{"schema_version", 1},
                    {"toolkit_version", std::string("v") + msae::kToolkitVersion},
                    {"config", resolved},
                    {"dataset", dataset_summary(ds)},
                    {"models", models}};
        write_text(fs::path(out_dir) / "train_report.json", doc.dump(2) + "\n");
        return 0;
    }
};

// ---------------------------------------------------------------------------
// eval

struct EvalCommand {
    CommonFlags common;
    std::string data;
    std::string model;
    std::vector<std::string> experts;
    std::vector<std::string> metric_names;
    bool all = false;
    std::size_t shuffle_runs = 100;
    std::size_t routing_runs = 10;
    std::string out;

    void attach(CLI::App* app) {
        app->add_option("--data", data, "Activation file")->required();
        app->add_option("--model", model, "Single (monolithic or capacity-matched) model file");
        app->add_option("--expert", experts, "DOMAIN=PATH expert model (repeat per domain)");
        app->add_option("--metric", metric_names, "sparsity | stability | entropy | specialization | mse")
            ->check(CLI::IsMember({"sparsity", "stability", "entropy", "specialization", "mse"}));
        app->add_flag("--all", all, "Every metric applicable to the given model(s)");
        app->add_option("--shuffle-runs", shuffle_runs, "Shuffled-label entropy baseline runs")->check(CLI::PositiveNumber);
        app->add_option("--routing-runs", routing_runs, "Random-routing baseline runs")->check(CLI::PositiveNumber);
        app->add_option("-o,--out", out, "Write metric JSON here instead of stdout");
        common.attach(app);
    }

    int run() const {
        namespace m = msae::metrics;
        const auto cfg = common.resolve();
        if (model.empty() == experts.empty()) throw UsageError("give either --model or one --expert per domain");
        const bool modular = !experts.empty();

        std::vector<std::string> selected = metric_names;
        if (all) {
            selected = modular ? std::vector<std::string>{"sparsity", "stability", "mse"}
                               : std::vector<std::string>{"sparsity", "stability", "entropy", "specialization", "mse"};
        }
        if (selected.empty()) throw UsageError("select metrics with --metric or --all");
        if (modular) {
            for (const auto& name : selected) {
                if (name == "entropy")
                    throw UsageError("entropy is not defined for modular experts: their features live in separate "
                                     "per-domain spaces; evaluate a shared monolithic model instead");
                if (name == "specialization")
                    throw UsageError("specialization is measured in a shared monolithic feature space; "
                                     "evaluate a monolithic model instead");
            }
        }
        const json resolved = {{"data", data},
                               {"model", model},
                               {"experts", experts},
                               {"metrics", selected},
                               {"metric_config", m::to_json(cfg.metrics)},
                               {"shuffle_runs", shuffle_runs},
                               {"routing_runs", routing_runs},
                               {"seed", cfg.master_seed}};
        log_config("eval", resolved);

        const auto ds = msae::load_activations(data);
        std::map<std::string, msae::SaeModel> models;
        if (modular) {
            for (const auto& spec : experts) {
                const auto eq = spec.find('=');
                if (eq == std::string::npos || eq == 0) throw UsageError("--expert expects DOMAIN=PATH, got '" + spec + "'");
                models.emplace(spec.substr(0, eq), msae::load_model(spec.substr(eq + 1)));
            }
        } else {
            models.emplace("monolithic", msae::load_model(model));
        }
        for (const auto& [name, sae] : models) {
            if (sae.input_dim != ds.dim())
                throw msae::ShapeMismatch("model '" + name + "' expects width " + std::to_string(sae.input_dim) +
                                          " but data has width " + std::to_string(ds.dim()));
        }

        const auto kind = modular ? msae::harness::ConditionKind::modular : msae::harness::ConditionKind::monolithic;
        const auto features = modular ? msae::harness::encode_routed(models, ds)
                                      : msae::encode(models.begin()->second, ds.data, "monolithic");
        m::validate(cfg.metrics, features.features());

        json records = json::array();
        for (const auto& name : selected) {
            if (name == "sparsity") {
                const auto s = m::sparsity_stats(features, cfg.metrics);
                records.push_back(m::metric_record(
                    "sparsity", {{"mean_active", s.mean_active}, {"sparsity_fraction", s.sparsity_fraction}},
                    cfg.metrics));
            } else if (name == "stability") {
                const auto s = m::within_domain_stability(features, ds.labels, ds.domains, cfg.metrics);
                json per = json::object();
                for (std::size_t d = 0; d < s.domains.size(); ++d) per[s.domains[d]] = s.per_domain[d];
                records.push_back(
                    m::metric_record("within_domain_stability", {{"overall", s.overall}, {"per_domain", per}}, cfg.metrics));
            } else if (name == "entropy") {
                const auto e = m::shuffled_entropy_baseline(features, ds.labels, ds.domains, cfg.metrics, shuffle_runs,
                                                            msae::harness::role_seed(cfg.master_seed, "shuffle"), cfg.jobs);
                records.push_back(m::metric_record(
                    "domain_feature_entropy", e.observed, cfg.metrics,
                    json{{"mean", e.baseline_mean}, {"std", e.baseline_std}, {"runs", e.runs}, {"p_value", e.p_value}}));
            } else if (name == "specialization") {
                const auto s = m::random_routing_baseline(features, ds.labels, ds.domains, cfg.metrics, routing_runs,
                                                          msae::harness::role_seed(cfg.master_seed, "routing"), cfg.jobs);
                records.push_back(m::metric_record("specialization", s.observed_fraction, cfg.metrics,
                                                   json{{"mean", s.baseline_mean}, {"std", s.baseline_std}, {"runs", s.runs}}));
            } else if (name == "mse") {
                const double mse = modular ? m::reconstruction_mse(models, ds)
                                           : m::reconstruction_mse(models.begin()->second, ds.data);
                records.push_back(m::metric_record("reconstruction_mse", mse, cfg.metrics));
            }
        }
        json doc = {{"schema_version", 1},
                    {"toolkit_version", std::string("v") + msae::kToolkitVersion},
                    {"condition", msae::harness::to_string(kind)},
                    {"config", resolved},
                    {"dataset", dataset_summary(ds)},
                    {"metrics", records}};
        const std::string text = doc.dump(2) + "\n";
        if (out.empty()) std::cout << text;
        else write_text(out, text);
        return 0;
    }
};

// ---------------------------------------------------------------------------
// compare

struct CompareCommand {
    CommonFlags common;
    std::string data;
    std::string out_dir;
    std::string formats = "json,markdown";
    std::optional<std::size_t> monolithic_hidden, expert_hidden, capacity_hidden;
    std::optional<std::size_t> shuffle_runs, routing_runs, n_seeds;
    bool no_capacity = false;

    void attach(CLI::App* app) {
        app->add_option("--data", data, "Activation file (default: the built-in synthetic benchmark)");
        app->add_option("-o,--out-dir", out_dir, "Directory for report files")->required();
        app->add_option("--format", formats, "Comma list of json, markdown, csv");
        app->add_option("--monolithic-hidden", monolithic_hidden);
        app->add_option("--expert-hidden", expert_hidden);
        app->add_option("--capacity-hidden", capacity_hidden);
        app->add_option("--shuffle-runs", shuffle_runs);
        app->add_option("--routing-runs", routing_runs);
        app->add_option("--n-seeds", n_seeds);
        app->add_flag("--no-capacity", no_capacity, "Skip the capacity-matched control");
        common.attach(app);
    }

    int run() const {
        std::vector<msae::report::Format> fmts;
        try {
            fmts = msae::report::parse_formats(formats);
        } catch (const msae::InvalidArgument& e) {
            throw UsageError(e.what());
        }
        auto cfg = common.resolve();
        if (monolithic_hidden) cfg.monolithic_hidden = *monolithic_hidden;
        if (expert_hidden) cfg.expert_hidden = *expert_hidden;
        if (capacity_hidden) cfg.capacity_hidden = *capacity_hidden;
        if (shuffle_runs) cfg.shuffle_runs = *shuffle_runs;
        if (routing_runs) cfg.routing_runs = *routing_runs;
        if (n_seeds) cfg.n_seeds = *n_seeds;
        if (no_capacity) cfg.include_capacity_matched = false;
        json resolved = msae::harness::to_json(cfg);
        resolved["data"] = data.empty() ? "builtin:default_benchmark" : data;
        resolved["jobs"] = cfg.jobs;
        log_config("compare", resolved);

        const auto ds = data.empty() ? msae::synth::make_default_benchmark() : msae::load_activations(data);
        const auto report = msae::harness::run_full_comparison(ds, cfg);
        fs::create_directories(out_dir);
        for (auto f : fmts)
            write_text(fs::path(out_dir) / ("report." + msae::report::extension(f)), msae::report::render(report, f));
        std::cout << msae::report::render(report, msae::report::Format::markdown);
        return 0;
    }
};

// ---------------------------------------------------------------------------
// extract-check

struct ExtractCheckCommand {
    std::string file;

    void attach(CLI::App* app) { app->add_option("file", file, "MSAEACT file to validate")->required(); }

    int run() const {
        try {
            const auto ds = msae::load_activations(file);
            json summary = dataset_summary(ds);
            summary["meta"] = ds.meta;
            summary["valid"] = true;
            std::cout << summary.dump(2) << "\n";
            return 0;
        } catch (const msae::Error& e) {
            std::cerr << "invalid activation file '" << file << "': " << e.what() << "\n";
            return kExitRuntime;
        }
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse-autoencoder diagnostics for monolithic vs. modular activation factorization"};
    app.set_version_flag("--version", std::string("msae v") + msae::kToolkitVersion);
    app.require_subcommand(1);

    SynthCommand synth;
    TrainCommand train;
    EvalCommand eval;
    CompareCommand compare;
    ExtractCheckCommand check;
    auto* synth_app = app.add_subcommand("synth", "Generate a synthetic activation dataset");
    auto* train_app = app.add_subcommand("train", "Train SAE(s) for one condition");
    auto* eval_app = app.add_subcommand("eval", "Compute metrics for trained model(s)");
    auto* compare_app = app.add_subcommand("compare", "Run the full monolithic vs. modular comparison");
    auto* check_app = app.add_subcommand("extract-check", "Validate an MSAEACT activation file");
    synth.attach(synth_app);
    train.attach(train_app);
    eval.attach(eval_app);
    compare.attach(compare_app);
    check.attach(check_app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (synth_app->parsed()) return synth.run();
        if (train_app->parsed()) return train.run();
        if (eval_app->parsed()) return eval.run();
        if (compare_app->parsed()) return compare.run();
        if (check_app->parsed()) return check.run();
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const msae::InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const msae::InvalidSpec& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
