#include "msae/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "msae/error.hpp"
#include "msae/version.hpp"

namespace msae::report {

namespace {

using harness::ConditionKind;
using harness::ConditionResult;

std::string fmt(const char* pattern, double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, value);
    return buf;
}

nlohmann::json per_domain(const std::vector<std::string>& domains, const std::vector<double>& values) {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t d = 0; d < domains.size() && d < values.size(); ++d) j[domains[d]] = values[d];
    return j;
}

std::string condition_label(const ConditionResult& c, std::size_t n_domains) {
    switch (c.kind) {
        case ConditionKind::monolithic: return "Monolithic (" + std::to_string(c.hidden_dim) + " features)";
        case ConditionKind::modular:
            return "Per-Expert (" + std::to_string(n_domains) + "x" + std::to_string(c.hidden_dim) +
                   ", ground-truth routing)";
        case ConditionKind::capacity_matched:
            return "Capacity-Matched Monolithic (" + std::to_string(c.hidden_dim) + ")";
    }
    return "?";
}

std::string csv_cell(const std::optional<double>& v) {
    return v ? fmt("%.17g", *v) : std::string{};
}

}  // namespace

Format parse_format(const std::string& name) {
    if (name == "json") return Format::json;
    if (name == "markdown" || name == "md") return Format::markdown;
    if (name == "csv") return Format::csv;
    throw InvalidArgument("unknown report format '" + name + "'");
}

std::vector<Format> parse_formats(const std::string& comma_list) {
    std::vector<Format> out;
    std::stringstream ss(comma_list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const Format f = parse_format(item);
        if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
    }
    if (out.empty()) throw InvalidArgument("no report format given");
    return out;
}

std::string extension(Format f) {
    switch (f) {
        case Format::json: return "json";
        case Format::markdown: return "md";
        case Format::csv: return "csv";
    }
    return "txt";
}

std::string hex64(std::uint64_t value) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

nlohmann::json to_json(const ConditionResult& c, const std::vector<std::string>& domains) {
    nlohmann::json j = {{"kind", harness::to_string(c.kind)},
                        {"hidden_dim", c.hidden_dim},
                        {"seed", c.seed},
                        {"mse", c.mse},
                        {"sparsity",
                         {{"mean_active", c.sparsity.mean_active}, {"sparsity_fraction", c.sparsity.sparsity_fraction}}}};
    if (c.stability)
        j["stability"] = {{"overall", c.stability->overall}, {"per_domain", per_domain(domains, c.stability->per_domain)}};
    if (c.entropy) j["entropy"] = {{"observed", *c.entropy}, {"per_domain", per_domain(domains, c.entropy_per_domain)}};
    nlohmann::json training = nlohmann::json::array();
    for (const auto& t : c.training) {
        nlohmann::json curve = nlohmann::json::array();
        for (const auto& e : t.report.epochs)
            curve.push_back({{"mse", e.mse}, {"l1_term", e.l1_term}, {"total_loss", e.total_loss}});
        training.push_back({{"name", t.name}, {"seed", t.seed}, {"final_mse", t.report.final_mse}, {"epochs", curve}});
    }
    j["training"] = training;
    return j;
}

nlohmann::json to_json(const harness::ComparisonReport& r) {
    nlohmann::json conditions = nlohmann::json::array();
    for (const auto& c : r.conditions) conditions.push_back(to_json(c, r.domains));

    nlohmann::json counts = nlohmann::json::object();
    for (std::size_t d = 0; d < r.domains.size(); ++d) counts[r.domains[d]] = r.domain_counts[d];

    const auto& se = r.shuffled_entropy;
    const auto& rr = r.random_routing;
    const auto& ms = r.multi_seed;
    return {
        {"schema_version", kReportSchemaVersion},
        {"toolkit_version", std::string("v") + kToolkitVersion},
        {"dataset",
         {{"rows", r.dataset_rows},
          {"dim", r.dataset_dim},
          {"domains", r.domains},
          {"domain_counts", counts},
          {"checksum_fnv1a64", hex64(r.dataset_checksum)},
          {"meta", r.dataset_meta}}},
        {"config", harness::to_json(r.config)},
        {"conditions", conditions},
        {"baselines",
         {{"shuffled_entropy",
           {{"observed", se.observed},
            {"mean", se.baseline_mean},
            {"std", se.baseline_std},
            {"runs", se.runs},
            {"p_value", se.p_value},
            {"seed", harness::role_seed(r.config.master_seed, "shuffle")}}},
          {"random_routing",
           {{"observed", rr.observed_fraction},
            {"mean", rr.baseline_mean},
            {"std", rr.baseline_std},
            {"runs", rr.runs},
            {"seed", harness::role_seed(r.config.master_seed, "routing")}}},
          {"multi_seed", {{"mean", ms.mean}, {"std", ms.std}, {"seeds", ms.seeds}, {"pairs", ms.pair_values}}}}},
        {"deltas",
         {{"unit", "percentage_points"},
          {"overall", r.overall_delta_pp},
          {"per_domain", per_domain(r.domains, r.stability_delta_pp)}}},
    };
}

std::string render(const harness::ComparisonReport& r, Format format) {
    if (format == Format::json) return to_json(r).dump(2) + "\n";

    const auto* mono = r.find(ConditionKind::monolithic);
    const auto* modular = r.find(ConditionKind::modular);
    const auto* capacity = r.find(ConditionKind::capacity_matched);
    const auto& se = r.shuffled_entropy;
    const auto& rr = r.random_routing;
    const auto& ms = r.multi_seed;

    std::ostringstream out;
    if (format == Format::markdown) {
        auto row = [&](const ConditionResult& c) {
            out << "| " << condition_label(c, r.domains.size()) << " | "
                << (c.stability ? fmt("%.3f", c.stability->overall) : "--") << " | "
                << (c.entropy ? fmt("%.2f", *c.entropy) : "--") << " | " << fmt("%.4f", c.mse) << " |\n";
        };
        out << "| Condition | Stability | Entropy | MSE |\n";
        out << "|---|---|---|---|\n";
        if (mono) row(*mono);
        if (modular) row(*modular);
        out << "| *Controls and Baselines* | | | |\n";
        out << "| Shuffled Labels (" << se.runs << " runs) | -- | " << fmt("%.2f", se.baseline_mean) << " ± "
            << fmt("%.2f", se.baseline_std) << " | -- |\n";
        if (capacity) row(*capacity);
        out << "\n## Controls and Baselines\n\n";
        out << "- Shuffled-label entropy: observed " << fmt("%.3f", se.observed) << " vs "
            << fmt("%.3f", se.baseline_mean) << " ± " << fmt("%.3f", se.baseline_std) << " (" << se.runs
            << " runs), p = " << fmt("%.4f", se.p_value) << "\n";
        out << "- Random-routing specialization: observed " << fmt("%.1f", 100.0 * rr.observed_fraction)
            << "% vs " << fmt("%.1f", 100.0 * rr.baseline_mean) << "% ± " << fmt("%.1f", 100.0 * rr.baseline_std)
            << "% (" << rr.runs << " runs)\n";
        out << "- Multi-seed top-feature Jaccard: " << fmt("%.3f", ms.mean) << " ± " << fmt("%.3f", ms.std) << " ("
            << ms.seeds.size() << " trainings)\n";
        out << "\n## Within-domain stability by domain\n\n";
        out << "| Domain | Monolithic | Per-Expert | Delta (pp) |\n";
        out << "|---|---|---|---|\n";
        for (std::size_t d = 0; d < r.domains.size(); ++d) {
            out << "| " << r.domains[d] << " | " << fmt("%.3f", mono->stability->per_domain[d]) << " | "
                << fmt("%.3f", modular->stability->per_domain[d]) << " | " << fmt("%+.1f", r.stability_delta_pp[d])
                << " |\n";
        }
        out << "| overall | " << fmt("%.3f", mono->stability->overall) << " | "
            << fmt("%.3f", modular->stability->overall) << " | " << fmt("%+.1f", r.overall_delta_pp) << " |\n";
        out << "\nDataset checksum " << hex64(r.dataset_checksum) << ", master seed " << r.config.master_seed
            << ", toolkit v" << kToolkitVersion << ".\n";
        out << "\n```json\n" << harness::to_json(r.config).dump(2) << "\n```\n";
        return out.str();
    }

    out << "# config=" << harness::to_json(r.config).dump() << "\n";
    out << "row,kind,hidden_dim,stability,entropy,mse,mean_active,observed,baseline_mean,baseline_std,runs,p_value\n";
    for (const auto& c : r.conditions) {
        out << harness::to_string(c.kind) << ",condition," << c.hidden_dim << ","
            << csv_cell(c.stability ? std::optional(c.stability->overall) : std::nullopt) << ","
            << csv_cell(c.entropy) << "," << csv_cell(c.mse) << "," << csv_cell(c.sparsity.mean_active) << ",,,,,\n";
    }
    out << "shuffled_entropy,baseline,,,,,," << csv_cell(se.observed) << "," << csv_cell(se.baseline_mean) << ","
        << csv_cell(se.baseline_std) << "," << se.runs << "," << csv_cell(se.p_value) << "\n";
    out << "random_routing,baseline,,,,,," << csv_cell(rr.observed_fraction) << "," << csv_cell(rr.baseline_mean)
        << "," << csv_cell(rr.baseline_std) << "," << rr.runs << ",\n";
    out << "multi_seed,baseline,,,,,,," << csv_cell(ms.mean) << "," << csv_cell(ms.std) << "," << ms.seeds.size()
        << ",\n";
    return out.str();
}

}  // namespace msae::report
