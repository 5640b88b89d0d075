// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>

#include "metric_properties.hpp"
#include "msae/activation_store.hpp"
#include "msae/error.hpp"
#include "msae/harness.hpp"
#include "msae/metrics.hpp"
#include "msae/report.hpp"
#include "msae/synthgen.hpp"
#include "msae/train.hpp"
#include "oracles.hpp"

using namespace msae;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Criterion 1: modular minus monolithic overall stability >= 5pp for master
// seeds 41, 42, 43 on the default benchmark, all three runs within 60 s.
Outcome directional_stability(const ActivationDataset& ds, harness::ComparisonReport& seed42) {
    Outcome o{true, {}};
    const auto start = Clock::now();
    for (std::uint64_t seed : {41, 42, 43}) {
        harness::ComparisonConfig cfg;
        cfg.master_seed = seed;
        auto r = harness::run_full_comparison(ds, cfg);
        o.detail += "seed " + std::to_string(seed) + ": " + fmt("%+.1f", r.overall_delta_pp) + "pp; ";
        if (!(r.overall_delta_pp >= 5.0)) o.pass = false;
        if (seed == 42) seed42 = std::move(r);
    }
    const double elapsed = seconds_since(start);
    o.detail += "runtime " + fmt("%.1f", elapsed) + " s (limit 60 s)";
    if (!(elapsed < 60.0)) o.pass = false;
    return o;
}

// Criterion 2: structured p <= 0.02 and unstructured (overlap = 1) p > 0.05.
Outcome entropy_significance(const harness::ComparisonReport& structured) {
    const auto start = Clock::now();
    const auto& se = structured.shuffled_entropy;

    auto spec = synth::default_benchmark_spec();
    spec.overlap = 1.0;
    const auto flat = synth::generate(spec);
    harness::ComparisonConfig cfg;
    harness::ConditionSpec mono;
    mono.hidden_dim = cfg.monolithic_hidden;
    mono.train = cfg.train;
    mono.train.seed = harness::role_seed(cfg.master_seed, "monolithic");
    const auto cond = harness::run_condition(flat, mono);
    const auto null = metrics::shuffled_entropy_baseline(cond.features, flat.labels, flat.domains, cfg.metrics,
                                                         cfg.shuffle_runs, harness::role_seed(cfg.master_seed, "shuffle"));
    const double elapsed = seconds_since(start);
    Outcome o;
    o.pass = se.runs == 100 && null.runs == 100 && se.p_value <= 0.02 && null.p_value > 0.05 && elapsed < 120.0;
    o.detail = "structured observed " + fmt("%.3f", se.observed) + " vs " + fmt("%.3f", se.baseline_mean) + " ± " +
               fmt("%.3f", se.baseline_std) + ", p = " + fmt("%.4f", se.p_value) + " (need <= 0.02); overlap=1 p = " +
               fmt("%.4f", null.p_value) + " (need > 0.05); control runtime " + fmt("%.1f", elapsed) + " s";
    return o;
}

// Criterion 3: H=64 entropy <= H=256 entropy at the same seed.
Outcome capacity_direction(const ActivationDataset& ds) {
    harness::ComparisonConfig cfg;
    harness::ConditionSpec spec;
    spec.train = cfg.train;
    spec.train.seed = harness::role_seed(cfg.master_seed, "monolithic");
    spec.hidden_dim = 256;
    const auto big = harness::run_condition(ds, spec);
    spec.kind = harness::ConditionKind::capacity_matched;
    spec.hidden_dim = 64;
    const auto small = harness::run_condition(ds, spec);
    Outcome o;
    o.pass = *small.entropy <= *big.entropy;
    o.detail = "H=64 entropy " + fmt("%.4f", *small.entropy) + " <= H=256 entropy " + fmt("%.4f", *big.entropy);
    return o;
}

// Criterion 4: 20 random instances (D <= 8, H <= 6, B <= 4), |pre| > 1e-3,
// central differences with eps = 1e-4, relative error < 1e-4.
Outcome gradient_correctness() {
    Rng rng(20240601);
    int instances = 0, rejected = 0;
    double worst = 0.0;
    while (instances < 20) {
        const std::size_t d = 1 + rng.below(8), h = 1 + rng.below(6), b = 1 + rng.below(4);
        const auto m = oracle::random_model(d, h, rng.next_u64());
        const auto x = oracle::random_matrix(b, d, rng.next_u64());
        const auto rows = oracle::to_rows(x);
        if (oracle::min_abs_preactivation(m, rows) <= 1e-3) {
            ++rejected;
            continue;
        }
        const double lambda = rng.uniform(0.0, 0.5);
        const auto g = gradients(m, x, lambda);
        const auto fd = oracle::finite_difference_gradient(m, rows, lambda, 1e-4);
        for (std::size_t i = 0; i < fd.size(); ++i) {
            const double denom = std::max({std::fabs(g.values[i]), std::fabs(fd[i]), 1e-6});
            worst = std::max(worst, std::fabs(g.values[i] - fd[i]) / denom);
        }
        ++instances;
    }
    return {worst < 1e-4, "20 instances (" + std::to_string(rejected) + " near-kink draws skipped), max rel err " +
                              fmt("%.2e", worst) + " (limit 1e-4)"};
}

// Criterion 5: Adam vs unrolled recurrence within 1e-10; norm-10 gradient clipped to 1 +- 1e-9.
Outcome optimizer_correctness() {
    TrainConfig cfg;
    auto state = AdamState::for_params({0.3});
    oracle::ScalarAdam ref{0.3};
    double worst = 0.0;
    for (double g0 : {0.2, -0.5, 0.9}) {
        std::vector<double> g = {g0};
        adam_step(state, g, cfg);
        ref.step(g0, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
        worst = std::max(worst, std::fabs(state.params[0] - ref.param));
    }
    Rng rng(5);
    std::vector<double> g(12);
    double sq = 0.0;
    for (auto& v : g) {
        v = rng.normal();
        sq += v * v;
    }
    for (auto& v : g) v *= 10.0 / std::sqrt(sq);
    auto big = AdamState::for_params(std::vector<double>(g.size(), 0.0));
    const double before = adam_step(big, g, cfg);
    double after = 0.0;
    for (double v : g) after += v * v;
    after = std::sqrt(after);
    const bool pass = worst < 1e-10 && std::fabs(before - 10.0) < 1e-9 && std::fabs(after - 1.0) < 1e-9;
    return {pass, "3-step max deviation " + fmt("%.2e", worst) + " (limit 1e-10); clipped norm " + fmt("%.12f", after) +
                      " from " + fmt("%.6f", before)};
}

// Criterion 6: lambda = 0, H = D = 16, N = 64, 200 epochs, final MSE < 1e-3.
// Rank-4 signal per domain with 0.01 noise, learning rate 3e-3.
Outcome reconstruction_sanity() {
    synth::SynthSpec spec;
    spec.dim = 16;
    spec.n_domains = 4;
    spec.n_per_domain = 16;
    spec.domain_subspace_rank = 4;
    spec.signal_scale = 1.0;
    spec.noise_scale = 0.01;
    const auto ds = synth::generate(spec);
    TrainConfig cfg;
    cfg.l1_lambda = 0.0;
    cfg.epochs = 200;
    cfg.learning_rate = 3e-3;
    const auto r = train(ds, 16, cfg);
    return {ds.rows() == 64 && r.report.final_mse < 1e-3,
            "N=" + std::to_string(ds.rows()) + ", final MSE " + fmt("%.3e", r.report.final_mse) + " after " +
                std::to_string(r.report.epochs.size()) + " epochs (limit 1e-3)"};
}

// Criterion 7: metric property suite plus the constructed extreme cases.
Outcome metric_properties() {
    auto failures = props::check_metric_properties(7, 300);
    using namespace metrics;
    auto fa_of = [](std::size_t rows, std::size_t h, const std::function<float(std::size_t, std::size_t)>& f) {
        FeatureActivations fa{MatrixF(rows, h), {}};
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < h; ++j) fa.values(r, j) = f(r, j);
        }
        return fa;
    };
    const std::vector<std::string> doms = {"a", "b", "c", "d"};
    std::vector<std::string> labels;
    for (std::size_t r = 0; r < 8; ++r) labels.push_back(doms[r / 2]);

    MetricConfig cfg;
    const auto uniform = fa_of(8, 40, [](std::size_t, std::size_t j) { return j < 10 ? 10.0f - j : 0.0f; });
    for (double e : per_domain_entropy(uniform, labels, doms, cfg)) {
        if (std::fabs(e - std::log(10.0)) > 1e-12) failures.push_back("uniform top-10 entropy != ln(10)");
    }
    MetricConfig k1 = cfg;
    k1.top_k_per_sample = 1;
    if (domain_feature_entropy(uniform, labels, doms, k1) != 0.0) failures.push_back("point-mass entropy != 0");

    MetricConfig sc = cfg;
    sc.top_k_per_sample = 3;
    sc.top_k_domain = 3;
    const auto same = fa_of(8, 40, [](std::size_t, std::size_t j) { return j < 3 ? 1.0f + j : 0.0f; });
    if (specialization(same, labels, doms, sc) != 0.0) failures.push_back("identical domain sets specialization != 0");
    const auto disjoint = fa_of(8, 40, [](std::size_t r, std::size_t j) {
        return j / 3 == r / 2 ? 1.0f + static_cast<float>(j % 3) : 0.0f;
    });
    if (specialization(disjoint, labels, doms, sc) != 1.0) failures.push_back("disjoint domain sets specialization != 1");

    Outcome o;
    o.pass = failures.empty();
    o.detail = o.pass ? "300 randomized trials + constructed cases, no violations"
                      : std::to_string(failures.size()) + " violations, first: " + failures.front();
    return o;
}

// Criterion 8: `compare --seed 42` twice and under --jobs 1 vs 4 gives identical JSON bytes.
Outcome cli_determinism(const std::string& msae, const fs::path& workdir) {
    if (msae.empty()) return {false, "no --msae executable given"};
    std::vector<std::string> bodies;
    for (const auto& [tag, jobs] : {std::pair{"a", 1}, std::pair{"b", 1}, std::pair{"c", 4}}) {
        const auto out = workdir / (std::string("compare_") + tag);
        fs::remove_all(out);
        const std::string cmd = "\"" + msae + "\" compare --seed 42 --jobs " + std::to_string(jobs) +
                                " --format json -o \"" + out.string() + "\" > \"" + out.string() + ".out\" 2> \"" +
                                out.string() + ".log\"";
        if (std::system(cmd.c_str()) != 0) return {false, "command failed: " + cmd};
        bodies.push_back(read_file(out / "report.json"));
    }
    const bool pass = !bodies[0].empty() && bodies[0] == bodies[1] && bodies[0] == bodies[2];
    return {pass, "report.json " + std::to_string(bodies[0].size()) + " bytes; run1 == run2: " +
                      (bodies[0] == bodies[1] ? "yes" : "no") + "; jobs 1 == jobs 4: " + (bodies[0] == bodies[2] ? "yes" : "no")};
}

// Criterion 9: 50 randomized save/load identities; corrupted checksum and truncated payload rejected.
Outcome format_round_trip(const fs::path& workdir) {
    Rng rng(909);
    int identical = 0;
    const auto path = workdir / "roundtrip.msaeact";
    for (int i = 0; i < 50; ++i) {
        const std::size_t n = 1 + rng.below(64), d = 1 + rng.below(48), k = 1 + rng.below(4);
        MatrixF data(n, d);
        for (auto& v : data.values()) v = static_cast<float>(rng.normal() * 100.0);
        std::vector<std::string> labels, ids;
        for (std::size_t r = 0; r < n; ++r) {
            labels.push_back(default_domains()[rng.below(k)]);
            ids.push_back("row" + std::to_string(r));
        }
        const auto ds = make_dataset(std::move(data), labels, ids,
                                     std::vector<std::string>(default_domains().begin(), default_domains().begin() + k),
                                     {{"trial", i}});
        save_activations(ds, path);
        identical += load_activations(path) == ds ? 1 : 0;
    }
    const auto good = encode_activations(load_activations(path));
    auto expect_reject = [&](std::vector<std::uint8_t> bytes, auto tag) {
        const auto bad = workdir / "bad.msaeact";
        std::ofstream(bad, std::ios::binary)
            .write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        try {
            load_activations(bad);
        } catch (const decltype(tag)&) {
            return true;
        } catch (...) {
            return false;
        }
        return false;
    };
    auto corrupt = good;
    corrupt[corrupt.size() - 3] ^= 0x5a;
    auto truncated = good;
    truncated.resize(truncated.size() - 12);
    const bool checksum_rejected = expect_reject(corrupt, MalformedFile(""));
    const bool truncation_rejected = expect_reject(truncated, ShapeMismatch(""));
    return {identical == 50 && checksum_rejected && truncation_rejected,
            std::to_string(identical) + "/50 identical; corrupted checksum rejected: " + (checksum_rejected ? "yes" : "no") +
                "; truncated payload rejected: " + (truncation_rejected ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    std::string msae;
    std::string workdir = (fs::temp_directory_path() / "msae_acceptance").string();
    app.add_option("--msae", msae, "Path to the msae executable");
    app.add_option("--workdir", workdir, "Scratch directory");
    CLI11_PARSE(app, argc, argv);
    fs::create_directories(workdir);

    const auto ds = synth::make_default_benchmark();
    harness::ComparisonReport seed42;
    int failed = 0;
    auto report = [&](int id, const std::string& name, const std::function<Outcome()>& run) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::cout << "AC" << id << " " << (o.pass ? "PASS" : "FAIL") << " " << name << ": " << o.detail << std::endl;
    };

    report(1, "directional stability effect", [&] { return directional_stability(ds, seed42); });
    report(2, "entropy significance", [&] { return entropy_significance(seed42); });
    report(3, "capacity-control direction", [&] { return capacity_direction(ds); });
    report(4, "gradient correctness", gradient_correctness);
    report(5, "optimizer correctness", optimizer_correctness);
    report(6, "reconstruction sanity", reconstruction_sanity);
    report(7, "metric property suite", metric_properties);
    report(8, "determinism", [&] { return cli_determinism(msae, workdir); });
    report(9, "format round-trip", [&] { return format_round_trip(workdir); });

    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
    return failed == 0 ? 0 : 1;
}
