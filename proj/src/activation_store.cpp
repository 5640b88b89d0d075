#include "msae/activation_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "msae/error.hpp"
#include "msae/rng.hpp"

namespace msae {

namespace {

constexpr char kMagic[8] = {'M', 'S', 'A', 'E', 'A', 'C', 'T', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderSize = 8 + 4 * 4;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

void append_payload(std::vector<std::uint8_t>& out, const MatrixF& data) {
    out.reserve(out.size() + data.values().size() * 4);
    for (float f : data.values()) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

std::vector<std::string> first_appearance(const std::vector<std::string>& labels) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& l : labels) {
        if (seen.insert(l).second) out.push_back(l);
    }
    return out;
}

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

}  // namespace

const std::vector<std::string>& default_domains() {
    static const std::vector<std::string> domains{"vision", "language", "crossmodal", "reasoning"};
    return domains;
}

void validate(const ActivationDataset& ds) {
    const std::size_t n = ds.rows();
    if (n == 0 || ds.dim() == 0) throw InvalidDataset("dataset must have N >= 1 and D >= 1");
    if (ds.labels.size() != n)
        throw InvalidDataset("label count " + std::to_string(ds.labels.size()) +
                             " does not match row count " + std::to_string(n));
    if (ds.prompt_ids.size() != n)
        throw InvalidDataset("prompt id count " + std::to_string(ds.prompt_ids.size()) +
                             " does not match row count " + std::to_string(n));
    if (ds.domains.empty()) throw InvalidDataset("label set is empty");
    std::unordered_set<std::string> domain_set;
    for (const auto& d : ds.domains) {
        if (!domain_set.insert(d).second) throw InvalidDataset("duplicate domain '" + d + "'");
    }
    for (const auto& l : ds.labels) {
        if (!domain_set.contains(l)) throw InvalidDataset("label '" + l + "' is not in the label set");
    }
    std::unordered_set<std::string> ids;
    for (const auto& id : ds.prompt_ids) {
        if (!ids.insert(id).second) throw InvalidDataset("duplicate prompt id '" + id + "'");
    }
    for (std::size_t i = 0; i < ds.data.values().size(); ++i) {
        if (!std::isfinite(ds.data.values()[i]))
            throw NonFiniteValue("non-finite activation at row " + std::to_string(i / ds.dim()) +
                                 ", column " + std::to_string(i % ds.dim()));
    }
}

ActivationDataset make_dataset(MatrixF data, std::vector<std::string> labels,
                               std::vector<std::string> prompt_ids, std::vector<std::string> domains,
                               nlohmann::json meta) {
    ActivationDataset ds;
    ds.data = std::move(data);
    if (domains.empty()) domains = first_appearance(labels);
    ds.labels = std::move(labels);
    ds.prompt_ids = std::move(prompt_ids);
    ds.domains = std::move(domains);
    ds.meta = std::move(meta);
    validate(ds);
    return ds;
}

std::uint64_t payload_checksum(const MatrixF& data) {
    std::vector<std::uint8_t> bytes;
    append_payload(bytes, data);
    return fnv1a64(bytes.data(), bytes.size());
}

std::vector<std::uint8_t> encode_activations(const ActivationDataset& ds) {
    validate(ds);
    nlohmann::json block = {{"labels", ds.labels},
                            {"prompt_ids", ds.prompt_ids},
                            {"meta", ds.meta},
                            {"domains", ds.domains}};
    const std::string text = block.dump();

    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(ds.rows()));
    put_u32(out, static_cast<std::uint32_t>(ds.dim()));
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    const std::size_t payload_start = out.size();
    append_payload(out, ds.data);
    put_u64(out, fnv1a64(out.data() + payload_start, out.size() - payload_start));
    return out;
}

ActivationDataset decode_activations(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kMagic, 8) != 0)
        throw MalformedFile("missing MSAEACT1 magic");
    const std::uint8_t* p = bytes.data() + 8;
    const std::uint32_t version = get_u32(p);
    if (version != kVersion) throw MalformedFile("unsupported MSAEACT version " + std::to_string(version));
    const std::uint64_t n = get_u32(p + 4);
    const std::uint64_t d = get_u32(p + 8);
    const std::uint64_t label_len = get_u32(p + 12);
    if (kHeaderSize + label_len > bytes.size()) throw MalformedFile("label block exceeds file size");

    const std::uint64_t remaining = bytes.size() - kHeaderSize - label_len;
    const std::uint64_t expected = n * d * 4;
    if (remaining < 8 || remaining - 8 != expected)
        throw ShapeMismatch("payload length does not match declared shape " + std::to_string(n) + "x" +
                            std::to_string(d));

    const std::uint8_t* payload = bytes.data() + kHeaderSize + label_len;
    const std::uint64_t stored = get_u64(payload + expected);
    if (fnv1a64(payload, expected) != stored) throw MalformedFile("payload checksum mismatch");

    nlohmann::json block;
    try {
        block = nlohmann::json::parse(bytes.begin() + kHeaderSize,
                                      bytes.begin() + static_cast<std::ptrdiff_t>(kHeaderSize + label_len));
    } catch (const nlohmann::json::exception& e) {
        throw MalformedFile(std::string("label block is not valid JSON: ") + e.what());
    }
    if (!block.is_object() || !block.contains("labels") || !block.contains("prompt_ids"))
        throw MalformedFile("label block lacks labels/prompt_ids");

    ActivationDataset ds;
    std::vector<float> values(n * d);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = std::bit_cast<float>(get_u32(payload + 4 * i));
    ds.data = MatrixF(n, d, std::move(values));
    try {
        ds.labels = block.at("labels").get<std::vector<std::string>>();
        ds.prompt_ids = block.at("prompt_ids").get<std::vector<std::string>>();
        ds.meta = block.value("meta", nlohmann::json::object());
        ds.domains = block.contains("domains") ? block.at("domains").get<std::vector<std::string>>()
                                               : first_appearance(ds.labels);
    } catch (const nlohmann::json::exception& e) {
        throw MalformedFile(std::string("label block has wrong types: ") + e.what());
    }
    if (ds.labels.size() != n || ds.prompt_ids.size() != n)
        throw ShapeMismatch("label block length does not match N=" + std::to_string(n));
    try {
        validate(ds);
    } catch (const NonFiniteValue&) {
        throw;
    } catch (const InvalidDataset& e) {
        throw MalformedFile(e.what());
    }
    return ds;
}

void save_activations(const ActivationDataset& ds, const std::filesystem::path& path) {
    const auto bytes = encode_activations(ds);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoFailure("write to '" + path.string() + "' failed");
}

ActivationDataset load_activations(const std::filesystem::path& path) {
    if (path.extension() == ".csv") return load_activations_csv(path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_activations(bytes);
}

ActivationDataset load_activations_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw MalformedFile("CSV file is empty");
    std::size_t header_cols = 1;
    for (char c : line) header_cols += (c == ',');
    if (header_cols < 2) throw MalformedFile("CSV needs at least one value column and a domain column");
    const std::size_t d = header_cols - 1;

    std::vector<float> values;
    std::vector<std::string> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
        if (cells.size() != header_cols)
            throw ShapeMismatch("CSV line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                                " columns, expected " + std::to_string(header_cols));
        for (std::size_t c = 0; c < d; ++c) {
            try {
                std::size_t used = 0;
                values.push_back(std::stof(cells[c], &used));
                if (used != cells[c].size()) throw std::invalid_argument("trailing characters");
            } catch (const std::exception&) {
                throw MalformedFile("CSV line " + std::to_string(line_no) + ": '" + cells[c] + "' is not a number");
            }
        }
        labels.push_back(cells.back());
    }
    const std::size_t n = labels.size();
    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = "row-" + std::to_string(i);
    return make_dataset(MatrixF(n, d, std::move(values)), std::move(labels), std::move(ids), {},
                        {{"source", "csv"}});
}

DatasetSplit split_by_labels(const std::vector<std::string>& labels, const std::vector<std::string>& domains) {
    DatasetSplit split;
    std::unordered_map<std::string, std::size_t> slot;
    for (const auto& d : domains) {
        slot.emplace(d, split.size());
        split.push_back({d, {}});
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto it = slot.find(labels[i]);
        if (it == slot.end()) throw InvalidDataset("label '" + labels[i] + "' is not in the label set");
        split[it->second].rows.push_back(i);
    }
    return split;
}

DatasetSplit split_by_domain(const ActivationDataset& ds) { return split_by_labels(ds.labels, ds.domains); }

std::vector<std::string> shuffle_labels(const std::vector<std::string>& labels, std::uint64_t seed) {
    const auto perm = random_permutation(labels.size(), seed);
    std::vector<std::string> out(labels.size());
    for (std::size_t i = 0; i < perm.size(); ++i) out[i] = labels[perm[i]];
    return out;
}

ActivationDataset shuffle_labels(const ActivationDataset& ds, std::uint64_t seed) {
    ActivationDataset out = ds;
    out.labels = shuffle_labels(ds.labels, seed);
    return out;
}

ActivationDataset select_rows(const ActivationDataset& ds, const std::vector<std::size_t>& rows) {
    ActivationDataset out;
    out.data = MatrixF(rows.size(), ds.dim());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto src = ds.data.row(rows[i]);
        std::copy(src.begin(), src.end(), out.data.row(i).begin());
        out.labels.push_back(ds.labels[rows[i]]);
        out.prompt_ids.push_back(ds.prompt_ids[rows[i]]);
    }
    out.domains = ds.domains;
    out.meta = ds.meta;
    return out;
}

}  // namespace msae
