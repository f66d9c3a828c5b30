#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "focus/matrix.hpp"

namespace focus {

// One slide: N patch embeddings in scan order. Labels live in the manifest;
// a bag read from disk carries one only after the caller attaches it.
struct FeatureBag {
  std::string id;
  Matrix features;                          // N x d
  std::vector<std::uint64_t> patch_indices;  // strictly increasing, length N
  std::optional<int> label;

  std::size_t size() const noexcept { return features.rows(); }
  std::size_t dim() const noexcept { return features.cols(); }

  // Throws if N == 0, any value is non-finite, or patch_indices are not
  // strictly increasing with length N.
  void validate() const;

  // Sub-bag of the given row positions (must be increasing).
  FeatureBag subset(std::span<const std::size_t> positions) const;
};

// Text-side embeddings. The attention query matrix is [learnable; knowledge].
struct PromptSet {
  Matrix knowledge;  // t1 x d, frozen
  Matrix learnable;  // t2 x d, trainable (may have zero rows)
  std::vector<std::string> class_names;

  std::size_t rows() const noexcept { return knowledge.rows() + learnable.rows(); }
  Matrix concatenated() const { return vstack(learnable, knowledge); }
  void validate() const;
};

struct StageRecord {
  std::string stage_name;
  double threshold_used = 0.0;
  std::size_t input_size = 0;
  std::vector<std::uint64_t> retained_original_indices;
  bool bypassed = false;

  double ratio() const noexcept {
    return input_size == 0 ? 0.0
                           : static_cast<double>(retained_original_indices.size()) /
                                 static_cast<double>(input_size);
  }
};

struct CompressionTrace {
  std::vector<std::uint64_t> input_indices;
  std::vector<StageRecord> stage_records;

  // Each record strictly increasing and a subset of the one before it (the
  // first is checked against input_indices). Throws focus::Error otherwise.
  void check_subset_chain() const;

  std::size_t final_size() const noexcept {
    return stage_records.empty() ? input_indices.size()
                                 : stage_records.back().retained_original_indices.size();
  }
  double overall_ratio() const noexcept;

  std::string to_json(int indent = 2) const;
};

}  // namespace focus
