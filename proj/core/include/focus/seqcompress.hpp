#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "focus/matrix.hpp"
#include "focus/types.hpp"

namespace focus {

// Per-stage thresholds theta_i = theta_base + i * delta_theta.
struct StageSchedule {
  std::vector<double> thresholds;

  static StageSchedule linear(double theta_base, double delta_theta, std::size_t n_stages);
  // Strictly increasing, every value in (0, 1]. Throws ConfigError.
  void validate() const;
};

// cos(b_j, b_{j+1}) for consecutive rows, clamped to [-1, 1]. Empty for a
// single row. Throws ZeroNormRow.
std::vector<double> neighbor_similarities(const Matrix& tokens);

struct StageOutcome {
  std::vector<bool> mask;                    // final keep decision per input row
  std::vector<std::size_t> kept_positions;  // increasing
  bool guard_fired = false;
};

// One compression pass. Row j survives iff the smaller of its neighbor
// similarities is below theta; the first and last rows have one neighbor.
// A lone row always survives. If nothing would survive, the row whose largest
// neighbor similarity is smallest is kept (lowest position on ties).
StageOutcome compress_stage_positions(const Matrix& tokens, double theta);

// Row-subset form of compress_stage_positions: (surviving rows, mask).
std::pair<Matrix, std::vector<bool>> compress_stage(const Matrix& tokens, double theta);

// Applies every stage in order, recomputing similarities on the survivors.
// Entry i holds the positions (into the original `tokens`) kept after stage i.
std::vector<std::vector<std::size_t>> compress_sequential_positions(
    const Matrix& tokens, const StageSchedule& schedule);

std::pair<FeatureBag, std::vector<StageRecord>> compress_sequential(
    const FeatureBag& bag, const StageSchedule& schedule);

}  // namespace focus
