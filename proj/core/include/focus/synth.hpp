#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "focus/manifest.hpp"
#include "focus/matrix.hpp"
#include "focus/types.hpp"

namespace focus {

// Planted-signal bag generator. Class c's bag has ceil(rho * N) signal tokens
// mu_c + noise at random positions; every other position belongs to a
// background run of `redundancy_run_len` tokens that share one vector
// (a background centroid + noise) plus a tiny per-token jitter. Class
// centroids are orthonormal; background centroids are random unit vectors
// shared by all classes. Noise vectors have per-coordinate deviation
// sigma / sqrt(d), so their expected norm is about sigma.
struct SynthSpec {
  std::size_t num_classes = 5;
  std::size_t bags_per_class = 40;
  std::size_t n_tokens = 2048;
  std::size_t d = 64;
  double signal_fraction = 0.05;
  std::size_t redundancy_run_len = 16;
  double noise_sigma = 0.1;
  std::size_t background_centroids = 8;
  double jitter = 1e-3;
  std::uint64_t seed = 0;

  std::size_t signal_count() const;
  // rho in (0, 1), rho * N >= 1, d >= S, run length >= 1, sigma >= 0.
  void validate() const;

  std::string to_json(int indent = 2) const;
  static SynthSpec from_json(std::string_view text);
  void apply_override(std::string_view assignment);
};

struct SyntheticBag {
  FeatureBag bag;
  std::vector<std::uint64_t> signal_indices;  // patch indices of planted tokens
};

struct SyntheticData {
  DatasetManifest manifest;  // paths "bags/<id>.fbag", prompts "prompts.fbag"
  std::vector<SyntheticBag> bags;  // parallel to manifest.bags
  Matrix prompts;                  // S x d knowledge prompts, row c for class c
  Matrix class_centroids;          // S x d
};

SyntheticData generate_synthetic(const SynthSpec& spec);

// Writes bags/, prompts.fbag, manifest.json, signal.json and synth.json.
void write_synthetic(const SyntheticData& data, const SynthSpec& spec,
                     const std::filesystem::path& dir);

// Fraction of `signal` patch indices present in `retained` (both increasing).
double signal_recall(const std::vector<std::uint64_t>& signal,
                     const std::vector<std::uint64_t>& retained);

}  // namespace focus
