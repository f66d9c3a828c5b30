#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "focus/matrix.hpp"
#include "focus/types.hpp"

namespace focus {

struct RelevanceScores {
  Matrix attention;                // (t1+t2) x N', rows sum to 1
  std::vector<double> relevance;  // column means of `attention`
};

// A = row_softmax((T Wq)(B Wk)^T / sqrt(d)) over the token axis, with
// T = [learnable; knowledge]; relevance r_i is the mean of column i.
RelevanceScores score_relevance(const Matrix& tokens, const Matrix& prompt_rows,
                                const Matrix& wq, const Matrix& wk);
RelevanceScores score_relevance(const Matrix& tokens, const PromptSet& prompts,
                                const Matrix& wq, const Matrix& wk);

// min(m_max, max(1, floor(gamma * n))).
std::size_t selection_size(std::size_t n, double gamma, std::size_t m_max);

struct SelectionResult {
  std::size_t k = 0;
  std::vector<std::size_t> selected_positions;  // ascending (scan order)
  double cutoff = 0.0;                           // relevance of the k-th ranked token
};

// Top-k by descending relevance; equal scores rank the lower position first.
SelectionResult select_topk(const RelevanceScores& scores, double gamma, std::size_t m_max);

// score_relevance + select_topk on a bag.
std::pair<FeatureBag, StageRecord> prioritize_tokens(const FeatureBag& bag,
                                                     const Matrix& prompt_rows,
                                                     const Matrix& wq, const Matrix& wk,
                                                     double gamma, std::size_t m_max);

}  // namespace focus
