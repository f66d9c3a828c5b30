#include "focus/seqcompress.hpp"

#include <algorithm>
#include <string>

#include "focus/errors.hpp"
#include "focus/redundancy.hpp"

namespace focus {

StageSchedule StageSchedule::linear(double theta_base, double delta_theta, std::size_t n_stages) {
  StageSchedule s;
  s.thresholds.resize(n_stages);
  for (std::size_t i = 0; i < n_stages; ++i) {
    s.thresholds[i] = theta_base + static_cast<double>(i) * delta_theta;
  }
  return s;
}

void StageSchedule::validate() const {
  if (thresholds.empty()) throw ConfigError("stage schedule is empty");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    const double t = thresholds[i];
    if (!(t > 0.0 && t <= 1.0)) throw ConfigError("stage threshold outside (0, 1]");
    if (i > 0 && !(t > thresholds[i - 1])) {
      throw ConfigError("stage thresholds must strictly increase");
    }
  }
}

std::vector<double> neighbor_similarities(const Matrix& tokens) {
  const std::size_t k = tokens.rows();
  if (k < 2) return {};
  std::vector<double> norms(k);
  for (std::size_t j = 0; j < k; ++j) {
    norms[j] = l2_norm(tokens.row(j));
    if (!(norms[j] >= kZeroNormThreshold)) throw ZeroNormRow(j);
  }
  std::vector<double> s(k - 1);
  for (std::size_t j = 0; j + 1 < k; ++j) {
    const double c = dot(tokens.row(j), tokens.row(j + 1)) / (norms[j] * norms[j + 1]);
    s[j] = std::clamp(c, -1.0, 1.0);
  }
  return s;
}

StageOutcome compress_stage_positions(const Matrix& tokens, double theta) {
  const std::size_t k = tokens.rows();
  StageOutcome out;
  if (k == 0) return out;
  out.mask.assign(k, false);
  if (k == 1) {
    out.mask[0] = true;
    out.kept_positions.push_back(0);
    return out;
  }
  const auto s = neighbor_similarities(tokens);
  auto min_neighbor = [&](std::size_t j) {
    if (j == 0) return s[0];
    if (j == k - 1) return s[k - 2];
    return std::min(s[j - 1], s[j]);
  };
  auto max_neighbor = [&](std::size_t j) {
    if (j == 0) return s[0];
    if (j == k - 1) return s[k - 2];
    return std::max(s[j - 1], s[j]);
  };
  for (std::size_t j = 0; j < k; ++j) {
    if (min_neighbor(j) < theta) {
      out.mask[j] = true;
      out.kept_positions.push_back(j);
    }
  }
  if (out.kept_positions.empty()) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (max_neighbor(j) < max_neighbor(best)) best = j;
    }
    out.mask[best] = true;
    out.kept_positions.push_back(best);
    out.guard_fired = true;
  }
  return out;
}

std::pair<Matrix, std::vector<bool>> compress_stage(const Matrix& tokens, double theta) {
  auto outcome = compress_stage_positions(tokens, theta);
  return {tokens.select_rows(outcome.kept_positions), std::move(outcome.mask)};
}

std::vector<std::vector<std::size_t>> compress_sequential_positions(
    const Matrix& tokens, const StageSchedule& schedule) {
  schedule.validate();
  std::vector<std::vector<std::size_t>> stages;
  stages.reserve(schedule.thresholds.size());
  std::vector<std::size_t> current(tokens.rows());
  for (std::size_t i = 0; i < current.size(); ++i) current[i] = i;
  Matrix seq = tokens;
  for (double theta : schedule.thresholds) {
    const auto outcome = compress_stage_positions(seq, theta);
    std::vector<std::size_t> next;
    next.reserve(outcome.kept_positions.size());
    for (std::size_t p : outcome.kept_positions) next.push_back(current[p]);
    seq = seq.select_rows(outcome.kept_positions);
    current = std::move(next);
    stages.push_back(current);
  }
  return stages;
}

std::pair<FeatureBag, std::vector<StageRecord>> compress_sequential(
    const FeatureBag& bag, const StageSchedule& schedule) {
  const auto stages = compress_sequential_positions(bag.features, schedule);
  std::vector<StageRecord> records;
  std::size_t input_size = bag.size();
  for (std::size_t i = 0; i < stages.size(); ++i) {
    StageRecord rec;
    rec.stage_name = "svtc." + std::to_string(i);
    rec.threshold_used = schedule.thresholds[i];
    rec.input_size = input_size;
    rec.retained_original_indices.reserve(stages[i].size());
    for (std::size_t p : stages[i]) rec.retained_original_indices.push_back(bag.patch_indices[p]);
    input_size = stages[i].size();
    records.push_back(std::move(rec));
  }
  return {bag.subset(stages.back()), std::move(records)};
}

}  // namespace focus
