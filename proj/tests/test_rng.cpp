#include <doctest.h>

#include <algorithm>
#include <set>

#include "msae/rng.hpp"

using namespace msae;

TEST_CASE("fnv1a64 matches published test vectors") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("Rng stream is fixed by the seed") {
    Rng a(42), b(42), c(43);
    std::vector<std::uint64_t> xa, xb, xc;
    for (int i = 0; i < 16; ++i) {
        xa.push_back(a.next_u64());
        xb.push_back(b.next_u64());
        xc.push_back(c.next_u64());
    }
    CHECK(xa == xb);
    CHECK(xa != xc);
}

TEST_CASE("Rng golden stream") {
    // Values from an independent Python transcription of SplitMix64 seeding +
    // xoshiro256**. Pinned so any change to the generator (which would silently change every
    // dataset, initialization and shuffle) fails loudly.
    Rng rng(42);
    const std::uint64_t first = rng.next_u64();
    const std::uint64_t second = rng.next_u64();
    CHECK(first == 0x15780b2e0c2ec716ULL);
    CHECK(second == 0x6104d9866d113a7eULL);
}

TEST_CASE("uniform lies in [0, 1) and below() stays in range") {
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(rng.below(13) < 13);
    }
}

TEST_CASE("below() is close to uniform") {
    Rng rng(11);
    std::vector<int> counts(6, 0);
    const int n = 60000;
    for (int i = 0; i < n; ++i) ++counts[rng.below(6)];
    for (int c : counts) CHECK(std::abs(c - n / 6) < 400);  // ~4.5 sigma
}

TEST_CASE("normal() has unit variance") {
    Rng rng(5);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sq / n - 1.0) < 0.02);
}

TEST_CASE("derive_seed separates roles and parents") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t parent : {0ULL, 1ULL, 42ULL}) {
        for (const char* role : {"monolithic", "modular", "shuffle:0", "shuffle:1"}) seen.insert(derive_seed(parent, role));
    }
    CHECK(seen.size() == 12);
    CHECK(derive_seed(42, "monolithic") == derive_seed(42, "monolithic"));
}

TEST_CASE("random_permutation is a permutation") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto p = random_permutation(37, seed);
        std::sort(p.begin(), p.end());
        for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == i);
    }
    CHECK(random_permutation(0, 1).empty());
    CHECK(random_permutation(1, 1) == std::vector<std::size_t>{0});
}
