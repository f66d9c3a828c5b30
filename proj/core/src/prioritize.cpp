#include "focus/prioritize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "focus/errors.hpp"
#include "focus/numerics.hpp"

namespace focus {

RelevanceScores score_relevance(const Matrix& tokens, const Matrix& prompt_rows,
                                const Matrix& wq, const Matrix& wk) {
  const std::size_t d = tokens.cols();
  if (prompt_rows.cols() != d) throw ShapeMismatch("prompt width differs from token width");
  if (wq.rows() != d || wk.rows() != d || wq.cols() != wk.cols()) {
    throw ShapeMismatch("stage-2 projections must be d x d' with matching d'");
  }
  if (prompt_rows.rows() == 0 || tokens.rows() == 0) {
    throw ShapeMismatch("relevance scoring needs prompts and tokens");
  }
  // (T Wq)(B Wk)^T == (T Wq Wk^T) B^T; the right-hand form avoids projecting
  // every token.
  Matrix query = matmul_nt(matmul(prompt_rows, wq), wk);
  Matrix logits = matmul_nt(query, tokens);
  logits *= 1.0 / std::sqrt(static_cast<double>(d));

  RelevanceScores out;
  out.attention = row_softmax(logits);
  out.relevance.assign(tokens.rows(), 0.0);
  for (std::size_t r = 0; r < out.attention.rows(); ++r) {
    auto row = out.attention.row(r);
    for (std::size_t i = 0; i < row.size(); ++i) out.relevance[i] += row[i];
  }
  const double inv = 1.0 / static_cast<double>(out.attention.rows());
  for (auto& v : out.relevance) v *= inv;
  return out;
}

RelevanceScores score_relevance(const Matrix& tokens, const PromptSet& prompts,
                                const Matrix& wq, const Matrix& wk) {
  return score_relevance(tokens, prompts.concatenated(), wq, wk);
}

std::size_t selection_size(std::size_t n, double gamma, std::size_t m_max) {
  // The epsilon absorbs representation error such as 0.7 * 10 = 6.999...
  const double raw = std::floor(gamma * static_cast<double>(n) + 1e-9);
  const auto k = static_cast<std::size_t>(std::max(1.0, raw));
  return std::min({m_max, k, std::max<std::size_t>(n, 1)});
}

SelectionResult select_topk(const RelevanceScores& scores, double gamma, std::size_t m_max) {
  const std::size_t n = scores.relevance.size();
  if (n == 0) throw ShapeMismatch("select_topk on an empty sequence");
  SelectionResult out;
  out.k = selection_size(n, gamma, m_max);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto& r = scores.relevance;
  auto by_rank = [&](std::size_t a, std::size_t b) {
    if (r[a] != r[b]) return r[a] > r[b];
    return a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(out.k), order.end(),
                    by_rank);
  out.cutoff = r[order[out.k - 1]];
  out.selected_positions.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(out.k));
  std::sort(out.selected_positions.begin(), out.selected_positions.end());
  return out;
}

std::pair<FeatureBag, StageRecord> prioritize_tokens(const FeatureBag& bag,
                                                     const Matrix& prompt_rows,
                                                     const Matrix& wq, const Matrix& wk,
                                                     double gamma, std::size_t m_max) {
  const auto scores = score_relevance(bag.features, prompt_rows, wq, wk);
  const auto sel = select_topk(scores, gamma, m_max);
  StageRecord rec;
  rec.stage_name = "prioritize";
  rec.threshold_used = sel.cutoff;
  rec.input_size = bag.size();
  FeatureBag out = bag.subset(sel.selected_positions);
  rec.retained_original_indices = out.patch_indices;
  return {std::move(out), std::move(rec)};
}

}  // namespace focus
