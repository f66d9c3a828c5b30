#include "focus/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "focus/errors.hpp"

namespace focus {

void EvalBatch::validate() const {
  if (probs.rows() != labels.size()) {
    throw ShapeMismatch("EvalBatch: " + std::to_string(probs.rows()) + " probability rows for " +
                        std::to_string(labels.size()) + " labels");
  }
  const int s = static_cast<int>(probs.cols());
  if (s < 2) throw ShapeMismatch("EvalBatch: need at least two classes");
  for (std::size_t m = 0; m < labels.size(); ++m) {
    if (labels[m] < 0 || labels[m] >= s) throw LabelOutOfRange(labels[m], s);
    double sum = 0.0;
    for (double p : probs.row(m)) {
      if (!std::isfinite(p)) throw NonFiniteValue("EvalBatch: non-finite probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw Error("EvalBatch: row " + std::to_string(m) + " sums to " + std::to_string(sum));
    }
  }
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

namespace {

struct Confusion {
  std::vector<std::size_t> support, predicted, correct;
};

Confusion confusion(const EvalBatch& batch) {
  batch.validate();
  const std::size_t s = batch.num_classes();
  Confusion c{std::vector<std::size_t>(s), std::vector<std::size_t>(s),
              std::vector<std::size_t>(s)};
  for (std::size_t m = 0; m < batch.size(); ++m) {
    const auto y = static_cast<std::size_t>(batch.labels[m]);
    const auto p = argmax(batch.probs.row(m));
    ++c.support[y];
    ++c.predicted[p];
    if (p == y) ++c.correct[y];
  }
  for (std::size_t k = 0; k < s; ++k) {
    if (c.support[k] == 0) throw MissingClass(static_cast<int>(k));
  }
  return c;
}

}  // namespace

double balanced_accuracy(const EvalBatch& batch) {
  const auto c = confusion(batch);
  double sum = 0.0;
  for (std::size_t k = 0; k < c.support.size(); ++k) {
    sum += static_cast<double>(c.correct[k]) / static_cast<double>(c.support[k]);
  }
  return sum / static_cast<double>(c.support.size());
}

double macro_f1(const EvalBatch& batch) {
  const auto c = confusion(batch);
  double sum = 0.0;
  for (std::size_t k = 0; k < c.support.size(); ++k) {
    const double denom = static_cast<double>(c.support[k] + c.predicted[k]);
    if (c.correct[k] > 0) sum += 2.0 * static_cast<double>(c.correct[k]) / denom;
  }
  return sum / static_cast<double>(c.support.size());
}

double binary_auc(std::span<const double> scores, const std::vector<bool>& positive) {
  const std::size_t m = scores.size();
  if (positive.size() != m) throw ShapeMismatch("binary_auc: length mismatch");
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Midranks (1-based) over tie groups.
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < m;) {
    std::size_t j = i;
    while (j + 1 < m && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) {
      if (positive[order[t]]) {
        pos_rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j + 1;
  }
  const std::size_t n_neg = m - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DegenerateAUC(-1);
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double auc(const EvalBatch& batch) {
  batch.validate();
  const std::size_t s = batch.num_classes();
  double sum = 0.0;
  std::vector<double> scores(batch.size());
  std::vector<bool> positive(batch.size());
  for (std::size_t k = 0; k < s; ++k) {
    std::size_t n_pos = 0;
    for (std::size_t m = 0; m < batch.size(); ++m) {
      scores[m] = batch.probs(m, k);
      positive[m] = batch.labels[m] == static_cast<int>(k);
      n_pos += positive[m] ? 1 : 0;
    }
    if (n_pos == 0 || n_pos == batch.size()) throw DegenerateAUC(static_cast<int>(k));
    sum += binary_auc(scores, positive);
  }
  return sum / static_cast<double>(s);
}

MetricSet evaluate_metrics(const EvalBatch& batch) {
  return {balanced_accuracy(batch), auc(batch), macro_f1(batch)};
}

}  // namespace focus
