#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace msae {

// 64-bit FNV-1a. Used for file checksums and for hashing role strings into seeds.
std::uint64_t fnv1a64(const void* data, std::size_t size,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view text);

// SplitMix64 finalizer: a bijective 64-bit mixer.
std::uint64_t splitmix64_mix(std::uint64_t x);

// Derives an independent child seed from a parent seed and a role string
// ("monolithic", "modular:vision", "shuffle:17", ...). Adding new roles never
// changes the seeds of existing ones.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view role);

// xoshiro256** seeded through SplitMix64. The stream is fully specified by the
// 64-bit seed and uses only integer arithmetic, so it is identical on every
// platform. Floating-point helpers are built on top of next_u64().
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform in [0, 1) with 53 random bits.
    double uniform();
    // Uniform in [lo, hi).
    double uniform(double lo, double hi);
    // Unbiased integer in [0, bound); bound must be > 0.
    std::uint64_t below(std::uint64_t bound);
    // Standard normal via the Marsaglia polar method.
    double normal();

    // Child generator for a named sub-stream.
    Rng split(std::string_view role) const;

private:
    std::uint64_t seed_;
    std::uint64_t s_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Uniformly random permutation of 0..n-1 (Fisher-Yates driven by Rng).
std::vector<std::size_t> random_permutation(std::size_t n, std::uint64_t seed);

}  // namespace msae
