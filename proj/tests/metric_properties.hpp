#pragma once

// Randomized property checks for the metrics module. Shared by the unit tests
// and the acceptance binary; each check appends a message on violation.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "msae/metrics.hpp"
#include "msae/rng.hpp"

namespace props {

struct Sample {
    msae::FeatureActivations fa;
    std::vector<std::string> labels;
    std::vector<std::string> domains;
};

// Sparse nonnegative activations; ties are made common by quantizing values.
inline Sample random_sample(msae::Rng& rng) {
    Sample s;
    const std::size_t n_domains = 2 + rng.below(3);
    const std::size_t per = 2 + rng.below(6);
    const std::size_t h = 8 + rng.below(40);
    for (std::size_t d = 0; d < n_domains; ++d) s.domains.push_back("dom" + std::to_string(d));
    s.fa.values = msae::MatrixF(n_domains * per, h);
    for (std::size_t r = 0; r < n_domains * per; ++r) {
        s.labels.push_back(s.domains[r / per]);
        for (std::size_t j = 0; j < h; ++j) {
            if (rng.uniform() < 0.3) s.fa.values(r, j) = static_cast<float>(1 + rng.below(5)) * 0.5f;
        }
    }
    return s;
}

inline msae::metrics::MetricConfig small_config(std::size_t h) {
    msae::metrics::MetricConfig cfg;
    cfg.top_k_per_sample = std::min<std::size_t>(5, h);
    cfg.top_k_domain = std::min<std::size_t>(6, h);
    cfg.top_k_global = std::min<std::size_t>(8, h);
    return cfg;
}

inline std::vector<std::string> check_metric_properties(std::uint64_t seed, int trials) {
    using namespace msae::metrics;
    std::vector<std::string> fail;
    auto expect = [&](bool ok, const std::string& what, int trial) {
        if (!ok) fail.push_back(what + " (trial " + std::to_string(trial) + ")");
    };
    msae::Rng rng(seed);
    for (int t = 0; t < trials; ++t) {
        const Sample s = random_sample(rng);
        const std::size_t h = s.fa.features();
        const auto cfg = small_config(h);

        // Jaccard bounds, symmetry and identity.
        const auto a = active_set(s.fa.values.row(0), cfg.active_eps);
        const auto b = active_set(s.fa.values.row(1), cfg.active_eps);
        const double jab = jaccard(a, b);
        expect(jab >= 0.0 && jab <= 1.0, "jaccard in [0,1]", t);
        expect(jab == jaccard(b, a), "jaccard symmetric", t);
        if (!a.empty()) expect(jaccard(a, a) == 1.0, "jaccard(a,a) = 1", t);

        // Stability bounds and invariance under within-domain row permutation.
        const auto stab = within_domain_stability(s.fa, s.labels, s.domains, cfg);
        expect(stab.overall >= 0.0 && stab.overall <= 1.0, "stability overall in [0,1]", t);
        std::vector<std::size_t> order(s.fa.rows());
        std::iota(order.begin(), order.end(), std::size_t{0});
        const std::size_t per = s.fa.rows() / s.domains.size();
        for (std::size_t d = 0; d < s.domains.size(); ++d) {
            const auto perm = msae::random_permutation(per, rng.next_u64());
            std::vector<std::size_t> block(per);
            for (std::size_t i = 0; i < per; ++i) block[i] = d * per + perm[i];
            std::copy(block.begin(), block.end(), order.begin() + static_cast<std::ptrdiff_t>(d * per));
        }
        msae::FeatureActivations permuted{msae::MatrixF(s.fa.rows(), h), {}};
        for (std::size_t r = 0; r < order.size(); ++r) {
            const auto src = s.fa.values.row(order[r]);
            std::copy(src.begin(), src.end(), permuted.values.row(r).begin());
        }
        const auto stab_p = within_domain_stability(permuted, s.labels, s.domains, cfg);
        for (std::size_t d = 0; d < s.domains.size(); ++d)
            expect(std::fabs(stab_p.per_domain[d] - stab.per_domain[d]) < 1e-12, "stability row-permutation invariant", t);

        // Entropy bounds and invariance under a consistent feature relabeling.
        const auto ent = per_domain_entropy(s.fa, s.labels, s.domains, cfg);
        const double cap = std::log(static_cast<double>(std::min(h, per * cfg.top_k_per_sample)));
        for (double e : ent) expect(e >= 0.0 && e <= cap + 1e-12, "entropy in [0, ln(min(H, rows*k))]", t);
        const auto fperm = msae::random_permutation(h, rng.next_u64());
        // Relabeling commutes with ranking only when there are no ties across the cut,
        // so compare on a tie-free copy.
        msae::FeatureActivations distinct = s.fa;
        for (std::size_t r = 0; r < s.fa.rows(); ++r) {
            for (std::size_t j = 0; j < h; ++j) {
                if (distinct.values(r, j) > 0.0f) distinct.values(r, j) += 1e-3f * static_cast<float>(j + 1);
            }
        }
        msae::FeatureActivations distinct_relabeled{msae::MatrixF(s.fa.rows(), h), {}};
        for (std::size_t r = 0; r < s.fa.rows(); ++r) {
            for (std::size_t j = 0; j < h; ++j) distinct_relabeled.values(r, fperm[j]) = distinct.values(r, j);
        }
        const double e1 = domain_feature_entropy(distinct, s.labels, s.domains, cfg);
        const double e2 = domain_feature_entropy(distinct_relabeled, s.labels, s.domains, cfg);
        expect(std::fabs(e1 - e2) < 1e-12, "entropy feature-relabel invariant", t);

        // Permutation p-value bounds.
        const std::size_t runs = 1 + rng.below(20);
        const auto eres = shuffled_entropy_baseline(s.fa, s.labels, s.domains, cfg, runs, rng.next_u64());
        expect(eres.p_value >= 1.0 / static_cast<double>(runs + 1) - 1e-15 && eres.p_value <= 1.0,
               "p-value in [1/(runs+1), 1]", t);
        expect(eres.observed >= 0.0, "observed entropy >= 0", t);

        // Specialization bounds and invariance under domain renaming.
        const double spec = specialization(s.fa, s.labels, s.domains, cfg);
        expect(spec >= 0.0 && spec <= 1.0, "specialization in [0,1]", t);
        std::vector<std::string> renamed_domains, renamed_labels;
        for (const auto& d : s.domains) renamed_domains.push_back("renamed-" + d);
        for (const auto& l : s.labels) renamed_labels.push_back("renamed-" + l);
        expect(specialization(s.fa, renamed_labels, renamed_domains, cfg) == spec, "specialization rename invariant", t);

        // Determinism of the seeded baselines.
        const std::uint64_t bs = rng.next_u64();
        const auto r1 = random_routing_baseline(s.fa, s.labels, s.domains, cfg, 5, bs);
        const auto r2 = random_routing_baseline(s.fa, s.labels, s.domains, cfg, 5, bs);
        expect(r1.null_values == r2.null_values && r1.baseline_mean == r2.baseline_mean, "routing baseline deterministic", t);
        const auto e3 = shuffled_entropy_baseline(s.fa, s.labels, s.domains, cfg, 5, bs, 3);
        const auto e4 = shuffled_entropy_baseline(s.fa, s.labels, s.domains, cfg, 5, bs, 1);
        expect(e3.null_values == e4.null_values, "entropy baseline independent of jobs", t);
    }
    return fail;
}

}  // namespace props
