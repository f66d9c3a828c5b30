#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "focus/matrix.hpp"

namespace focus {

// Class probabilities for M evaluated bags, one row per bag.
struct EvalBatch {
  Matrix probs;  // M x S, rows sum to 1 (+/- 1e-6)
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t num_classes() const noexcept { return probs.cols(); }
  // Shapes agree, labels in range, rows finite and summing to 1.
  void validate() const;
};

// Index of the largest value; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

// Mean per-class recall. Throws MissingClass if a class has no samples.
double balanced_accuracy(const EvalBatch& batch);
// Mean per-class F1; a class never predicted (and so with zero precision) scores 0.
double macro_f1(const EvalBatch& batch);
// Macro one-vs-rest AUC from the Mann-Whitney statistic; tied scores count 1/2.
// Throws DegenerateAUC when a class has no positives or no negatives.
double auc(const EvalBatch& batch);
// Binary ranking AUC of `scores` against `positive` flags.
double binary_auc(std::span<const double> scores, const std::vector<bool>& positive);

struct MetricSet {
  double balanced_acc = 0.0;
  double auc = 0.0;
  double f1 = 0.0;
};
MetricSet evaluate_metrics(const EvalBatch& batch);

}  // namespace focus
