#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace focus {

// Which pipeline components are active. The five cumulative ablation
// variants are BaseMIL (all off), +Prompt, +KAVTC, +SVTC, +CrossAgg (full).
struct AblationFlags {
  bool prompt = true;    // prompt-similarity head when crossagg is off
  bool kavtc = true;     // global redundancy removal + language-guided top-k
  bool svtc = true;      // sequential neighbor-similarity compression
  bool crossagg = true;  // cross-modal multi-head aggregation head

  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

struct AblationVariant {
  std::string name;
  AblationFlags flags;
};

// BaseMIL, +Prompt, +KAVTC, +SVTC, +CrossAgg in that order.
std::vector<AblationVariant> cumulative_variants();

struct RunConfig {
  // Compression
  std::size_t w = 32;
  double gamma = 0.8;
  std::size_t m_max = 4096;
  double theta_base = 0.7;
  double delta_theta = 0.05;
  std::size_t n_stages = 3;

  // Model
  std::size_t heads = 8;
  std::size_t t2 = 4;  // learnable prompt rows

  // Protocol
  std::size_t k_shot = 4;
  std::size_t n_folds = 10;
  double lr = 1e-4;
  double weight_decay = 0.01;
  std::size_t max_epochs = 80;
  std::size_t patience = 10;
  std::uint64_t seed = 0;

  AblationFlags ablation;

  // Throws ConfigError on any violated invariant.
  void validate() const;
  // validate() plus the checks that need the feature width.
  void validate_for_dim(std::size_t d) const;

  std::size_t head_dim(std::size_t d) const { return d / heads; }
  // theta_i = theta_base + i * delta_theta for i in [0, n_stages).
  std::vector<double> thresholds() const;

  std::string to_json(int indent = 2) const;
  // Strict: unknown keys and wrong value types raise ConfigError. Keys that
  // are absent keep their defaults.
  static RunConfig from_json(std::string_view text);
  // "dotted.key=value"; value is parsed as JSON, falling back to a string.
  void apply_override(std::string_view assignment);
};

}  // namespace focus
