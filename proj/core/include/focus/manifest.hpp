#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace focus {

enum class Split { Train, Val, Test };

std::string to_string(Split s);
Split parse_split(const std::string& s);

struct BagEntry {
  std::string path;  // relative to the manifest directory
  int label = 0;
  Split split = Split::Train;
};

// Dataset listing. Labels live here rather than in feature files so one
// feature file can serve any number of split schemes.
struct DatasetManifest {
  std::size_t d = 0;
  std::vector<std::string> class_names;
  std::vector<BagEntry> bags;
  // Optional knowledge-prompt file (FeatureFile format, one row per class).
  std::optional<std::string> prompts;
  // Directory the relative paths resolve against. Not serialized.
  std::filesystem::path base_dir;

  std::size_t num_classes() const noexcept { return class_names.size(); }
  std::filesystem::path resolve(const std::string& relative) const {
    return base_dir / relative;
  }

  // Labels in range and every class present in the train split.
  void validate() const;
  std::vector<std::size_t> indices(Split s) const;
  std::vector<std::size_t> indices(Split s, int label) const;

  std::string to_json(int indent = 2) const;
  static DatasetManifest from_json(const std::string& text,
                                   const std::filesystem::path& base_dir);
};

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// K bag ids (entry paths) per class from the train split, without replacement.
// Ids are grouped by class in class order. Throws InsufficientShots.
std::vector<std::string> sample_k_shot(const DatasetManifest& manifest, std::size_t k,
                                       std::uint64_t seed);

// One label-stratified 6:2:2 resampling. Per class of n bags: floor(n/5) to
// val, floor(n/5) to test, the rest to train. The fold seed is
// derive_seed(master_seed, fold_index).
DatasetManifest make_fold(const DatasetManifest& manifest, std::size_t fold_index,
                          std::uint64_t master_seed);

// n_folds independent resamplings; n_folds must be >= 2.
std::vector<DatasetManifest> make_folds(const DatasetManifest& manifest, std::size_t n_folds,
                                        std::uint64_t master_seed);

}  // namespace focus
