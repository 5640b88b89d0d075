#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "msae/activation_store.hpp"

namespace msae::synth {

// Planted-structure dataset description. Each domain owns
// `domain_subspace_rank` orthonormal signal directions; round(overlap * rank)
// of them come from a pool shared by every domain.
struct SynthSpec {
    std::size_t n_per_domain = 50;
    std::size_t dim = 256;
    std::size_t n_domains = 4;
    std::size_t domain_subspace_rank = 8;
    double signal_scale = 15.0;
    double noise_scale = 0.1;
    double overlap = 0.25;
    std::uint64_t seed = 42;
};

void validate(const SynthSpec& spec);
nlohmann::json to_json(const SynthSpec& spec);

std::size_t shared_directions(const SynthSpec& spec);

// Domain names: the default four for n_domains <= 4, otherwise "domain<i>".
std::vector<std::string> domain_names(std::size_t n_domains);

// Orthonormal direction pool: shared directions first, then each domain's own.
// Row r of the result is one unit-norm direction of length spec.dim.
MatrixD direction_pool(const SynthSpec& spec);

// Pool row indices used by domain d.
std::vector<std::size_t> domain_directions(const SynthSpec& spec, std::size_t domain);

// Rows are grouped by domain. Each row is sum_j c_j u_j + noise with
// c_j ~ signal_scale * U(0, 1] and noise ~ noise_scale * N(0, 1) per element.
ActivationDataset generate(const SynthSpec& spec);

// 4 domains x 50 rows, dim 256, rank 8, overlap 0.25, noise 0.1, signal 15, seed 42.
SynthSpec default_benchmark_spec();
ActivationDataset make_default_benchmark();

}  // namespace msae::synth
