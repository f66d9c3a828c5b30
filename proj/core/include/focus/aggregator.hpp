#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "focus/matrix.hpp"
#include "focus/numerics.hpp"
#include "focus/rng.hpp"

namespace focus {

// Parameter names. The shared d x d projections are also the stage-2
// relevance projections, so they train through the aggregator.
namespace param {
inline const std::string kLearnablePrompts = "prompt.learnable";  // t2 x d
inline const std::string kProjQ = "proj.q";                       // d x d
inline const std::string kProjK = "proj.k";                       // d x d
inline const std::string kOut = "out.w";                          // (h*d_k) x d
inline const std::string kNormScale = "norm.scale";               // 1 x d
inline const std::string kNormShift = "norm.shift";               // 1 x d
inline const std::string kClsW = "cls.w";                         // d x S
inline const std::string kClsB = "cls.b";                         // 1 x S
inline const std::string kPoolV = "pool.v";                       // d x L
inline const std::string kPoolU = "pool.u";                       // d x L
inline const std::string kPoolW = "pool.w";                       // L x 1
inline const std::string kTextProj = "text.proj";                 // d x d

std::string head_q(std::size_t i);  // d x d_k
std::string head_k(std::size_t i);
std::string head_v(std::size_t i);
}  // namespace param

inline constexpr double kInitStd = 0.02;

// N(0, kInitStd^2) matrix.
Matrix init_normal(std::size_t rows, std::size_t cols, CounterRng& rng);

// Registers per-head projections, W_o, layer-norm affine and the classifier.
// proj.q / proj.k / prompt.learnable are registered by the caller since the
// stage-2 scorer needs them even without this head.
void register_aggregator_params(ParamStore& params, std::size_t d, std::size_t heads,
                                std::size_t num_classes, CounterRng& rng);

struct AggregatorCache {
  Matrix prompts;  // T
  Matrix tokens;   // B_c
  Matrix q_shared;  // T Wq
  Matrix k_shared;  // B_c Wk
  std::vector<Matrix> q, k, v, attn;
  Matrix concat;  // [Head_1 .. Head_h]
  Matrix projected;  // concat * W_o
  LayerNormCache norm;
};

// O = LayerNorm(Concat(Head_1..Head_h) W_o) with
//   Head_i = softmax((T Wq Wq_i)(B Wk Wk_i)^T / sqrt(d_k)) (B Wv_i).
// Returns O of shape (t1+t2) x d.
Matrix aggregate(const Matrix& tokens, const Matrix& prompt_rows, const ParamStore& params,
                 std::size_t heads, AggregatorCache* cache = nullptr);

// Accumulates parameter gradients for dL/dO; returns dL/dT (prompt rows).
Matrix aggregate_backward(const AggregatorCache& cache, const Matrix& d_out, ParamStore& params,
                          std::size_t heads);

// logits = mean_rows(O) * W_c + beta_c.
std::vector<double> classify(const Matrix& aggregated, const ParamStore& params);
// Accumulates W_c / beta_c gradients; returns dL/dO.
Matrix classify_backward(const Matrix& aggregated, std::span<const double> d_logits,
                         ParamStore& params);

}  // namespace focus
