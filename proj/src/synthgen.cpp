#include "msae/synthgen.hpp"

#include <cmath>
#include <cstdio>

#include "msae/error.hpp"
#include "msae/rng.hpp"

namespace msae::synth {

void validate(const SynthSpec& spec) {
    if (spec.n_per_domain == 0) throw InvalidSpec("n_per_domain must be >= 1");
    if (spec.dim == 0) throw InvalidSpec("dim must be >= 1");
    if (spec.n_domains == 0) throw InvalidSpec("n_domains must be >= 1");
    if (spec.domain_subspace_rank == 0) throw InvalidSpec("domain_subspace_rank must be >= 1");
    if (!(spec.noise_scale >= 0.0)) throw InvalidSpec("noise_scale must be >= 0");
    if (!(spec.signal_scale > 0.0)) throw InvalidSpec("signal_scale must be > 0");
    if (!(spec.overlap >= 0.0 && spec.overlap <= 1.0)) throw InvalidSpec("overlap must lie in [0, 1]");
    const std::size_t shared = shared_directions(spec);
    const std::size_t total = shared + spec.n_domains * (spec.domain_subspace_rank - shared);
    if (total > spec.dim)
        throw InvalidSpec("dim " + std::to_string(spec.dim) + " cannot hold " + std::to_string(total) +
                          " orthonormal signal directions");
}

nlohmann::json to_json(const SynthSpec& spec) {
    return {{"n_per_domain", spec.n_per_domain}, {"dim", spec.dim},
            {"n_domains", spec.n_domains},       {"domain_subspace_rank", spec.domain_subspace_rank},
            {"signal_scale", spec.signal_scale}, {"noise_scale", spec.noise_scale},
            {"overlap", spec.overlap},           {"seed", spec.seed}};
}

std::size_t shared_directions(const SynthSpec& spec) {
    return static_cast<std::size_t>(std::llround(spec.overlap * static_cast<double>(spec.domain_subspace_rank)));
}

std::vector<std::string> domain_names(std::size_t n_domains) {
    std::vector<std::string> names;
    for (std::size_t d = 0; d < n_domains; ++d) {
        if (n_domains <= default_domains().size()) names.push_back(default_domains()[d]);
        else names.push_back("domain" + std::to_string(d));
    }
    return names;
}

MatrixD direction_pool(const SynthSpec& spec) {
    validate(spec);
    const std::size_t shared = shared_directions(spec);
    const std::size_t count = shared + spec.n_domains * (spec.domain_subspace_rank - shared);
    MatrixD pool(count, spec.dim);
    Rng rng(derive_seed(spec.seed, "directions"));
    for (std::size_t i = 0; i < count; ++i) {
        auto v = pool.row(i);
        // Redraw on the (measure-zero) event of a dependent candidate.
        for (;;) {
            for (auto& x : v) x = rng.normal();
            // Two Gram-Schmidt passes keep the pool orthonormal to rounding.
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t p = 0; p < i; ++p) {
                    const auto u = pool.row(p);
                    double proj = 0.0;
                    for (std::size_t k = 0; k < spec.dim; ++k) proj += u[k] * v[k];
                    for (std::size_t k = 0; k < spec.dim; ++k) v[k] -= proj * u[k];
                }
            }
            double norm = 0.0;
            for (double x : v) norm += x * x;
            norm = std::sqrt(norm);
            if (norm > 1e-8) {
                for (auto& x : v) x /= norm;
                break;
            }
        }
    }
    return pool;
}

std::vector<std::size_t> domain_directions(const SynthSpec& spec, std::size_t domain) {
    const std::size_t shared = shared_directions(spec);
    const std::size_t own = spec.domain_subspace_rank - shared;
    std::vector<std::size_t> idx;
    for (std::size_t s = 0; s < shared; ++s) idx.push_back(s);
    for (std::size_t o = 0; o < own; ++o) idx.push_back(shared + domain * own + o);
    return idx;
}

ActivationDataset generate(const SynthSpec& spec) {
    validate(spec);
    const MatrixD pool = direction_pool(spec);
    const auto names = domain_names(spec.n_domains);
    const std::size_t n = spec.n_per_domain * spec.n_domains;

    MatrixF data(n, spec.dim);
    std::vector<std::string> labels;
    std::vector<std::string> ids;
    Rng rng(derive_seed(spec.seed, "rows"));
    std::vector<double> row(spec.dim);
    for (std::size_t d = 0; d < spec.n_domains; ++d) {
        const auto dirs = domain_directions(spec, d);
        for (std::size_t i = 0; i < spec.n_per_domain; ++i) {
            std::fill(row.begin(), row.end(), 0.0);
            for (std::size_t p : dirs) {
                const double c = spec.signal_scale * (1.0 - rng.uniform());
                const auto u = pool.row(p);
                for (std::size_t k = 0; k < spec.dim; ++k) row[k] += c * u[k];
            }
            if (spec.noise_scale > 0.0) {
                for (auto& x : row) x += spec.noise_scale * rng.normal();
            }
            const std::size_t r = d * spec.n_per_domain + i;
            for (std::size_t k = 0; k < spec.dim; ++k) data(r, k) = static_cast<float>(row[k]);
            labels.push_back(names[d]);
            char id[64];
            std::snprintf(id, sizeof id, "%s-%03zu", names[d].c_str(), i);
            ids.emplace_back(id);
        }
    }
    nlohmann::json meta = {{"source", "synthgen"}, {"synth_spec", to_json(spec)}};
    return make_dataset(std::move(data), std::move(labels), std::move(ids), names, std::move(meta));
}

SynthSpec default_benchmark_spec() { return SynthSpec{}; }

ActivationDataset make_default_benchmark() { return generate(default_benchmark_spec()); }

}  // namespace msae::synth
