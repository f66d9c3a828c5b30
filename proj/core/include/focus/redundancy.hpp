#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "focus/matrix.hpp"
#include "focus/parallel.hpp"
#include "focus/types.hpp"

namespace focus {

inline constexpr double kZeroNormThreshold = 1e-12;

// Every row scaled to unit L2 norm. Throws ZeroNormRow for rows with norm
// below kZeroNormThreshold.
Matrix normalize_rows(const Matrix& features);

// Cosine statistics of one window of w' tokens.
struct WindowStats {
  Matrix similarities;          // w' x w', symmetric, unit diagonal
  double mu = 0.0;              // mean over all w'^2 entries
  double sigma = 0.0;           // population std over all w'^2 entries
  double tau_g = 0.0;           // mu + sigma
  std::vector<double> mean_sim;  // R_i, row means of `similarities`
};

// `window` holds raw features; scoring uses normalized copies.
// `first_row` only offsets the index reported by ZeroNormRow.
WindowStats window_stats(const Matrix& window, std::size_t first_row = 0);

struct RedundancyResult {
  std::vector<std::size_t> kept_positions;  // increasing row positions
  double mean_tau = 0.0;                     // mean tau_g over scored windows (NaN if none)
  std::size_t windows_scored = 0;
};

// Global redundancy filter over consecutive non-overlapping windows of size w.
// In each window with w' >= 2 tokens, token i is dropped iff R_i > tau_g.
// A trailing single-token window passes through. A window never loses all
// its tokens: the one with the lowest R_i (then lowest position) stays.
RedundancyResult remove_global_redundancy_positions(const Matrix& features, std::size_t w,
                                                    Execution exec = Execution::Sequential);

// Same filter on a bag. The returned bag carries the original (unnormalized)
// features of the kept tokens.
std::pair<FeatureBag, StageRecord> remove_global_redundancy(
    const FeatureBag& bag, std::size_t w, Execution exec = Execution::Sequential);

}  // namespace focus
