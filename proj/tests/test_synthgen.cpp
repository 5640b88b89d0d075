#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "msae/error.hpp"
#include "msae/metrics.hpp"
#include "msae/synthgen.hpp"
#include "msae/train.hpp"

using namespace msae;
using namespace msae::synth;

namespace {

Eigen::MatrixXd domain_block(const ActivationDataset& ds, const std::string& domain) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        if (ds.labels[r] == domain) rows.push_back(r);
    }
    Eigen::MatrixXd m(rows.size(), ds.dim());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < ds.dim(); ++k) m(i, k) = ds.data(rows[i], k);
    }
    return m;
}

std::size_t numerical_rank(const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    std::size_t rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) rank += s[i] > 1e-4 * s[0] ? 1 : 0;
    return rank;
}

}  // namespace

TEST_CASE("noise-free, overlap-free domains lie in a rank-r subspace") {
    SynthSpec spec;
    spec.dim = 64;
    spec.n_per_domain = 30;
    spec.domain_subspace_rank = 5;
    spec.noise_scale = 0.0;
    spec.overlap = 0.0;
    const auto ds = generate(spec);
    for (const auto& d : ds.domains) CHECK(numerical_rank(domain_block(ds, d)) == 5);

    // Different domains are orthogonal.
    const auto a = domain_block(ds, "vision");
    const auto b = domain_block(ds, "language");
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < b.rows(); ++j)
            worst = std::max(worst, std::fabs(a.row(i).dot(b.row(j))) / (a.row(i).norm() * b.row(j).norm()));
    }
    CHECK(worst < 1e-5);

    // Stacking all four domains gives rank 4 * 5.
    Eigen::MatrixXd all(ds.rows(), ds.dim());
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        for (std::size_t k = 0; k < ds.dim(); ++k) all(r, k) = ds.data(r, k);
    }
    CHECK(numerical_rank(all) == 20);
}

TEST_CASE("shared directions reduce the joint rank") {
    SynthSpec spec;
    spec.dim = 64;
    spec.n_per_domain = 30;
    spec.domain_subspace_rank = 8;
    spec.noise_scale = 0.0;
    spec.overlap = 0.25;
    const auto ds = generate(spec);
    Eigen::MatrixXd all(ds.rows(), ds.dim());
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        for (std::size_t k = 0; k < ds.dim(); ++k) all(r, k) = ds.data(r, k);
    }
    CHECK(shared_directions(spec) == 2);
    CHECK(numerical_rank(all) == 2 + 4 * 6);
}

TEST_CASE("direction pool is orthonormal") {
    SynthSpec spec;
    spec.dim = 48;
    spec.overlap = 0.5;
    const auto pool = direction_pool(spec);
    CHECK(pool.rows() == 4 + 4 * 4);
    for (std::size_t i = 0; i < pool.rows(); ++i) {
        for (std::size_t j = 0; j < pool.rows(); ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < pool.cols(); ++k) dot += pool(i, k) * pool(j, k);
            CHECK(std::fabs(dot - (i == j ? 1.0 : 0.0)) < 1e-12);
        }
    }
    CHECK(domain_directions(spec, 0) == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7});
    CHECK(domain_directions(spec, 1) == std::vector<std::size_t>{0, 1, 2, 3, 8, 9, 10, 11});
}

TEST_CASE("generation is deterministic in the seed") {
    SynthSpec spec;
    spec.dim = 32;
    spec.n_per_domain = 5;
    CHECK(generate(spec) == generate(spec));
    auto other = spec;
    other.seed = 43;
    CHECK(generate(other).data != generate(spec).data);
}

TEST_CASE("default benchmark shape, balance and checksum") {
    const auto ds = make_default_benchmark();
    CHECK(ds.rows() == 200);
    CHECK(ds.dim() == 256);
    CHECK(ds.domains == default_domains());
    for (const auto& part : split_by_domain(ds)) CHECK(part.rows.size() == 50);
    CHECK(ds.meta["source"] == "synthgen");
    CHECK(ds.meta["synth_spec"]["seed"] == 42);
    CHECK(payload_checksum(ds.data) == 0x2b74d8115562cae0ULL);
}

TEST_CASE("invalid specs are refused") {
    SynthSpec spec;
    spec.domain_subspace_rank = 0;
    CHECK_THROWS_AS(generate(spec), InvalidSpec);
    spec = {};
    spec.noise_scale = -1.0;
    CHECK_THROWS_AS(generate(spec), InvalidSpec);
    spec = {};
    spec.overlap = 0.0;
    spec.dim = 31;
    spec.domain_subspace_rank = 8;
    CHECK_THROWS_AS(generate(spec), InvalidSpec);
    spec.dim = 32;
    CHECK_NOTHROW(generate(spec));
    spec.overlap = 1.5;
    CHECK_THROWS_AS(generate(spec), InvalidSpec);
}

TEST_CASE("more overlap does not raise measured specialization") {
    SynthSpec spec;
    spec.dim = 64;
    spec.n_per_domain = 30;
    spec.domain_subspace_rank = 6;
    TrainConfig tcfg;
    tcfg.epochs = 10;
    metrics::MetricConfig mcfg;
    mcfg.top_k_domain = 10;
    double previous_mean = INFINITY;
    for (double overlap : {0.0, 0.5, 1.0}) {
        double sum = 0.0;
        for (std::uint64_t seed : {1, 2, 3}) {
            spec.overlap = overlap;
            spec.seed = seed;
            tcfg.seed = seed;
            const auto ds = generate(spec);
            const auto trained = train(ds, 32, tcfg);
            sum += metrics::specialization(encode(trained.model, ds.data), ds.labels, ds.domains, mcfg);
        }
        const double mean = sum / 3.0;
        MESSAGE("overlap " << overlap << " specialization " << mean);
        CHECK(mean <= previous_mean);
        previous_mean = mean;
    }
}
