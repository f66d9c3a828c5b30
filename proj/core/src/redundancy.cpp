#include "focus/redundancy.hpp"

#include <cmath>
#include <limits>

#include "focus/errors.hpp"

namespace focus {

Matrix normalize_rows(const Matrix& features) {
  Matrix out(features.rows(), features.cols());
  for (std::size_t r = 0; r < features.rows(); ++r) {
    auto src = features.row(r);
    const double norm = l2_norm(src);
    if (!(norm >= kZeroNormThreshold)) throw ZeroNormRow(r);
    auto dst = out.row(r);
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] = src[c] / norm;
  }
  return out;
}

namespace {

// Shared by window_stats and the bag filter; `scratch` avoids reallocating
// the normalized window for every call on large bags.
void compute_stats(const Matrix& features, std::size_t begin, std::size_t len,
                   Matrix& scratch, WindowStats& stats) {
  const std::size_t d = features.cols();
  if (scratch.rows() != len || scratch.cols() != d) scratch = Matrix(len, d);
  for (std::size_t i = 0; i < len; ++i) {
    auto src = features.row(begin + i);
    const double norm = l2_norm(src);
    if (!(norm >= kZeroNormThreshold)) throw ZeroNormRow(begin + i);
    auto dst = scratch.row(i);
    for (std::size_t c = 0; c < d; ++c) dst[c] = src[c] / norm;
  }

  Matrix& s = stats.similarities;
  if (s.rows() != len) s = Matrix(len, len);
  for (std::size_t i = 0; i < len; ++i) {
    s(i, i) = dot(scratch.row(i), scratch.row(i));
    for (std::size_t j = i + 1; j < len; ++j) {
      const double v = dot(scratch.row(i), scratch.row(j));
      s(i, j) = v;
      s(j, i) = v;
    }
  }

  const double n = static_cast<double>(len);
  stats.mean_sim.assign(len, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < len; ++j) row_sum += s(i, j);
    stats.mean_sim[i] = row_sum / n;
    total += row_sum;
  }
  stats.mu = total / (n * n);
  double sq = 0.0;
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t j = 0; j < len; ++j) {
      const double dev = s(i, j) - stats.mu;
      sq += dev * dev;
    }
  stats.sigma = std::sqrt(sq / (n * n));
  stats.tau_g = stats.mu + stats.sigma;
}

}  // namespace

WindowStats window_stats(const Matrix& window, std::size_t first_row) {
  WindowStats stats;
  Matrix scratch;
  try {
    compute_stats(window, 0, window.rows(), scratch, stats);
  } catch (const ZeroNormRow& e) {
    throw ZeroNormRow(e.index() + first_row);
  }
  return stats;
}

RedundancyResult remove_global_redundancy_positions(const Matrix& features, std::size_t w,
                                                    Execution exec) {
  if (w < 2) throw ConfigError("window size must be >= 2");
  const std::size_t n = features.rows();
  const std::size_t n_windows = (n + w - 1) / w;

  struct WindowOut {
    std::vector<std::size_t> kept;
    double tau = std::numeric_limits<double>::quiet_NaN();
  };
  std::vector<WindowOut> outs(n_windows);

  parallel_for(n_windows, exec, [&](std::size_t wi) {
    const std::size_t begin = wi * w;
    const std::size_t len = std::min(w, n - begin);
    auto& out = outs[wi];
    if (len == 1) {
      out.kept.push_back(begin);
      return;
    }
    thread_local Matrix scratch;
    thread_local WindowStats stats;
    compute_stats(features, begin, len, scratch, stats);
    out.tau = stats.tau_g;
    for (std::size_t i = 0; i < len; ++i) {
      if (!(stats.mean_sim[i] > stats.tau_g)) out.kept.push_back(begin + i);
    }
    if (out.kept.empty()) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < len; ++i) {
        if (stats.mean_sim[i] < stats.mean_sim[best]) best = i;
      }
      out.kept.push_back(begin + best);
    }
  });

  RedundancyResult result;
  double tau_sum = 0.0;
  for (const auto& out : outs) {
    result.kept_positions.insert(result.kept_positions.end(), out.kept.begin(), out.kept.end());
    if (!std::isnan(out.tau)) {
      tau_sum += out.tau;
      ++result.windows_scored;
    }
  }
  result.mean_tau = result.windows_scored == 0
                        ? std::numeric_limits<double>::quiet_NaN()
                        : tau_sum / static_cast<double>(result.windows_scored);
  return result;
}

std::pair<FeatureBag, StageRecord> remove_global_redundancy(const FeatureBag& bag, std::size_t w,
                                                            Execution exec) {
  auto res = remove_global_redundancy_positions(bag.features, w, exec);
  StageRecord rec;
  rec.stage_name = "redundancy";
  rec.threshold_used = res.mean_tau;
  rec.input_size = bag.size();
  FeatureBag out = bag.subset(res.kept_positions);
  rec.retained_original_indices = out.patch_indices;
  return {std::move(out), std::move(rec)};
}

}  // namespace focus
