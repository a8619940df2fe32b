#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "amdmil/mil.hpp"

namespace amdmil {

/// Planted-instance bag generator settings.
///
/// Background instances are N(0, noise_std^2) in every coordinate. A bag of
/// class c > 0 holds ceil(witness_rate * N) witnesses whose mean is shifted
/// by `separation` along coordinate axis (c - 1) mod D. Class 0 bags hold no
/// witnesses.
struct DatasetConfig {
    std::uint64_t seed = 7;
    std::size_t num_bags = 200;
    std::size_t dim = 64;
    std::size_t min_instances = 50;
    std::size_t max_instances = 200;
    double witness_rate = 0.05;
    std::size_t classes = 2;
    double separation = 2.0;
    double noise_std = 1.0;

    void validate() const;
    std::size_t witness_count(std::size_t instances) const;
};

std::vector<Bag> generate_dataset(const DatasetConfig& cfg);

inline constexpr std::uint32_t kBagFileVersion = 1;
inline constexpr std::uint32_t kManifestVersion = 1;

/// MILF record: "MILF", u32 version, u32 N, u32 D, u32 label,
/// u32 has_instance_labels, [N label bytes], N*D float32, all little-endian.
std::vector<unsigned char> encode_bag(const Bag& bag);
/// `id` is not part of the record; callers pass it through.
Bag decode_bag(const std::vector<unsigned char>& bytes, std::string id);

void save_bag(const Bag& bag, const std::filesystem::path& path);
Bag load_bag(const std::filesystem::path& path);

/// Writes one `<id>.milf` per bag plus `manifest.json` into `dir`.
/// The manifest echoes `cfg` when given.
void save_bags(const std::vector<Bag>& bags, const std::filesystem::path& dir, const DatasetConfig* cfg = nullptr);
/// Loads every record listed in `<dir>/manifest.json` (or the manifest
/// path itself).
std::vector<Bag> load_bags(const std::filesystem::path& dir_or_manifest);

/// Reads the config echo from a manifest, if present.
std::optional<DatasetConfig> load_manifest_config(const std::filesystem::path& dir_or_manifest);

struct FoldPlan {
    std::size_t k = 0;
    bool stratified = true;
    std::vector<std::string> ids;     // bag ids, in dataset order
    std::vector<std::size_t> fold_of;  // fold index per bag

    std::vector<std::size_t> test_indices(std::size_t fold) const;
    std::vector<std::size_t> train_indices(std::size_t fold) const;
    std::size_t fold_of_id(const std::string& id) const;
};

/// Deterministic k-way partition. Stratified plans shuffle each class
/// separately and deal bags round-robin with one running counter, so fold
/// sizes differ by at most one and per-fold class counts by at most one.
FoldPlan split_folds(const std::vector<Bag>& bags, std::size_t k, std::uint64_t seed, bool stratified = true);

}  // namespace amdmil
