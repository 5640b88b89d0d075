#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "msae/matrix.hpp"

namespace msae {

// Default domain label set, in canonical order.
const std::vector<std::string>& default_domains();

// N x D activation matrix with one domain label and one prompt id per row.
//
// `domains` is the label set. It may list domains that no row uses, which is
// how split_by_domain reports empty partitions.
struct ActivationDataset {
    MatrixF data;
    std::vector<std::string> labels;
    std::vector<std::string> prompt_ids;
    std::vector<std::string> domains;
    nlohmann::json meta = nlohmann::json::object();

    std::size_t rows() const { return data.rows(); }
    std::size_t dim() const { return data.cols(); }

    bool operator==(const ActivationDataset&) const = default;
};

// Throws InvalidDataset or NonFiniteValue when an invariant is broken.
void validate(const ActivationDataset& ds);

// Builds a dataset, filling `domains` from first appearance when omitted, and validates it.
ActivationDataset make_dataset(MatrixF data, std::vector<std::string> labels,
                               std::vector<std::string> prompt_ids,
                               std::vector<std::string> domains = {},
                               nlohmann::json meta = nlohmann::json::object());

// FNV-1a over the little-endian float32 payload; also the MSAEACT trailer checksum.
std::uint64_t payload_checksum(const MatrixF& data);

// MSAEACT1 binary format. The CSV reader accepts a header row with the domain
// label in the last column and numeric activations in every other column.
void save_activations(const ActivationDataset& ds, const std::filesystem::path& path);
ActivationDataset load_activations(const std::filesystem::path& path);
ActivationDataset load_activations_csv(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_activations(const ActivationDataset& ds);
ActivationDataset decode_activations(const std::vector<std::uint8_t>& bytes);

struct DomainRows {
    std::string domain;
    std::vector<std::size_t> rows;
};

// Per-domain row lists in label-set order; rows keep dataset order.
using DatasetSplit = std::vector<DomainRows>;

DatasetSplit split_by_domain(const ActivationDataset& ds);
DatasetSplit split_by_labels(const std::vector<std::string>& labels,
                             const std::vector<std::string>& domains);

// Copy whose labels are permuted uniformly at random: labels'[i] = labels[perm[i]]
// with perm = random_permutation(N, seed).
ActivationDataset shuffle_labels(const ActivationDataset& ds, std::uint64_t seed);
std::vector<std::string> shuffle_labels(const std::vector<std::string>& labels, std::uint64_t seed);

// Subset of rows, preserving label set and metadata.
ActivationDataset select_rows(const ActivationDataset& ds, const std::vector<std::size_t>& rows);

}  // namespace msae
