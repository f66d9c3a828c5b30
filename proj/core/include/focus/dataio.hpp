#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "focus/manifest.hpp"
#include "focus/matrix.hpp"
#include "focus/types.hpp"

namespace focus {

// Feature file layout, all little-endian:
//
//   offset  size  field
//   0       4     magic "FBAG"
//   4       4     version (u32, currently 1)
//   8       8     N (u64)
//   16      4     d (u32)
//   20      4     flags (u32, reserved, 0)
//   24      4*N*d features, f32 row-major
//   ...     8*N   patch indices, u64
inline constexpr char kFeatureMagic[4] = {'F', 'B', 'A', 'G'};
inline constexpr std::uint32_t kFeatureVersion = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 24;

std::uint64_t feature_file_size(std::uint64_t n, std::uint32_t d);

// Reads and validates a bag. The id is the file stem; the label is left
// empty (labels come from the manifest). Throws BadMagic, TruncatedFile
// (with the byte offset where data ran out), NonFiniteValue, IoError.
FeatureBag read_bag(const std::filesystem::path& path);

// Values are narrowed to f32 on write. Writes are whole-file.
void write_bag(const FeatureBag& bag, const std::filesystem::path& path);

// Prompt embeddings share the feature-file format: one row per prompt.
Matrix read_prompts(const std::filesystem::path& path);
void write_prompts(const Matrix& prompts, const std::filesystem::path& path);

// Manifest plus every bag it lists (labels attached) and the knowledge
// prompts when the manifest names a prompt file.
struct Dataset {
  DatasetManifest manifest;
  std::vector<FeatureBag> bags;  // parallel to manifest.bags
  Matrix knowledge;              // t1 x d; empty if the manifest has no prompts
};

Dataset load_dataset(const std::filesystem::path& manifest_path);

// Raw-matrix import. `input_dir` holds labels.json:
//   {"d": int, "classes": [str], "slides": [{"file": str, "label": int}],
//    "prompts": str (optional raw prompt matrix)}
// and per-slide raw f32 little-endian row-major N x d matrices. Writes one
// feature file per slide plus manifest.json into `output_dir`, assigning
// splits with make_fold(seed, 0).
DatasetManifest convert_raw_directory(const std::filesystem::path& input_dir,
                                      const std::filesystem::path& output_dir,
                                      std::uint64_t seed);

}  // namespace focus
