#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "msae/harness.hpp"

namespace msae::report {

inline constexpr int kReportSchemaVersion = 1;

enum class Format { json, markdown, csv };

Format parse_format(const std::string& name);  // "json", "markdown" / "md", "csv"
std::vector<Format> parse_formats(const std::string& comma_list);
std::string extension(Format f);

// Schema-versioned report document. Contains no timing information so equal
// inputs serialize to equal bytes.
nlohmann::json to_json(const harness::ComparisonReport& report);
nlohmann::json to_json(const harness::ConditionResult& condition, const std::vector<std::string>& domains);

// json: pretty-printed document; markdown: condition table with a
// "Controls and Baselines" block; csv: one row per condition and baseline.
std::string render(const harness::ComparisonReport& report, Format format);

std::string hex64(std::uint64_t value);

}  // namespace msae::report
