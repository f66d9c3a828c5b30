#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "focus/numerics.hpp"

namespace focus {

// Loss closure. When `with_grad` is true it must also accumulate analytic
// gradients into the store (which arrives with gradients cleared).
using LossClosure = std::function<double(ParamStore& params, bool with_grad)>;

struct GradCheckEntry {
  std::string name;
  std::size_t index = 0;  // flat row-major position
  double analytic = 0.0;
  double numeric = 0.0;
  double error = 0.0;  // |analytic - numeric| / max(1, |numeric|)
};

struct GradCheckReport {
  double tolerance = 0.0;
  std::vector<GradCheckEntry> entries;
  std::vector<std::string> checked_tensors;
  double max_error = 0.0;
  bool passed = true;

  std::vector<GradCheckEntry> failures() const;
  std::string summary() const;
};

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  std::size_t max_coords_per_tensor = 64;
  std::uint64_t seed = 0;
};

// Central-difference check of every trainable tensor. Tensors with more than
// max_coords_per_tensor entries are subsampled with a seeded draw. Frozen
// tensors are skipped and do not appear in the report.
GradCheckReport grad_check(const LossClosure& loss, ParamStore& params,
                           const GradCheckOptions& options = {});

}  // namespace focus
