#include "focus/aggregator.hpp"

#include <cmath>

#include "focus/errors.hpp"

namespace focus {

namespace param {
std::string head_q(std::size_t i) { return "head." + std::to_string(i) + ".q"; }
std::string head_k(std::size_t i) { return "head." + std::to_string(i) + ".k"; }
std::string head_v(std::size_t i) { return "head." + std::to_string(i) + ".v"; }
}  // namespace param

Matrix init_normal(std::size_t rows, std::size_t cols, CounterRng& rng) {
  Matrix m(rows, cols);
  for (auto& v : m.values()) v = kInitStd * rng.normal();
  return m;
}

void register_aggregator_params(ParamStore& params, std::size_t d, std::size_t heads,
                                std::size_t num_classes, CounterRng& rng) {
  if (heads == 0 || d % heads != 0) throw ShapeMismatch("d must be divisible by heads");
  const std::size_t dk = d / heads;
  for (std::size_t i = 0; i < heads; ++i) {
    params.add(param::head_q(i), init_normal(d, dk, rng));
    params.add(param::head_k(i), init_normal(d, dk, rng));
    params.add(param::head_v(i), init_normal(d, dk, rng));
  }
  params.add(param::kOut, init_normal(heads * dk, d, rng));
  params.add(param::kNormScale, Matrix(1, d, 1.0));
  params.add(param::kNormShift, Matrix(1, d, 0.0));
  params.add(param::kClsW, init_normal(d, num_classes, rng));
  params.add(param::kClsB, Matrix(1, num_classes, 0.0));
}

Matrix aggregate(const Matrix& tokens, const Matrix& prompt_rows, const ParamStore& params,
                 std::size_t heads, AggregatorCache* cache) {
  const std::size_t d = tokens.cols();
  if (tokens.rows() == 0) throw ShapeMismatch("aggregate needs at least one token");
  if (prompt_rows.cols() != d) throw ShapeMismatch("prompt width differs from token width");
  if (heads == 0 || d % heads != 0) throw ShapeMismatch("d must be divisible by heads");
  const std::size_t dk = d / heads;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

  Matrix q_shared = matmul(prompt_rows, params.value(param::kProjQ));
  Matrix k_shared = matmul(tokens, params.value(param::kProjK));

  const std::size_t t = prompt_rows.rows();
  Matrix concat(t, heads * dk);
  std::vector<Matrix> qs, ks, vs, attns;
  for (std::size_t i = 0; i < heads; ++i) {
    Matrix q = matmul(q_shared, params.value(param::head_q(i)));
    Matrix k = matmul(k_shared, params.value(param::head_k(i)));
    Matrix v = matmul(tokens, params.value(param::head_v(i)));
    Matrix scores = matmul_nt(q, k);
    scores *= inv_sqrt_dk;
    Matrix attn = row_softmax(scores);
    Matrix head = matmul(attn, v);
    for (std::size_t r = 0; r < t; ++r)
      for (std::size_t c = 0; c < dk; ++c) concat(r, i * dk + c) = head(r, c);
    if (cache != nullptr) {
      qs.push_back(std::move(q));
      ks.push_back(std::move(k));
      vs.push_back(std::move(v));
      attns.push_back(std::move(attn));
    }
  }
  Matrix projected = matmul(concat, params.value(param::kOut));
  LayerNormCache norm;
  Matrix out = layer_norm(projected, params.value(param::kNormScale),
                          params.value(param::kNormShift), cache ? &norm : nullptr);
  if (cache != nullptr) {
    cache->prompts = prompt_rows;
    cache->tokens = tokens;
    cache->q_shared = std::move(q_shared);
    cache->k_shared = std::move(k_shared);
    cache->q = std::move(qs);
    cache->k = std::move(ks);
    cache->v = std::move(vs);
    cache->attn = std::move(attns);
    cache->concat = std::move(concat);
    cache->projected = std::move(projected);
    cache->norm = std::move(norm);
  }
  return out;
}

Matrix aggregate_backward(const AggregatorCache& cache, const Matrix& d_out, ParamStore& params,
                          std::size_t heads) {
  const std::size_t d = cache.tokens.cols();
  const std::size_t dk = d / heads;
  const std::size_t t = cache.prompts.rows();
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

  // LayerNorm
  Matrix d_proj(t, d);
  Matrix d_scale(1, d), d_shift(1, d);
  layer_norm_backward(cache.norm, params.value(param::kNormScale), d_out, d_proj, &d_scale,
                      &d_shift);
  params.accumulate_grad(param::kNormScale, d_scale);
  params.accumulate_grad(param::kNormShift, d_shift);

  // Output projection
  const Matrix& w_out = params.value(param::kOut);
  Matrix d_concat(t, heads * dk);
  Matrix d_wout(w_out.rows(), w_out.cols());
  matmul_backward(cache.concat, w_out, d_proj, &d_concat, &d_wout);
  params.accumulate_grad(param::kOut, d_wout);

  Matrix d_qshared(t, d);
  Matrix d_kshared(cache.tokens.rows(), d);
  for (std::size_t i = 0; i < heads; ++i) {
    Matrix d_head(t, dk);
    for (std::size_t r = 0; r < t; ++r)
      for (std::size_t c = 0; c < dk; ++c) d_head(r, c) = d_concat(r, i * dk + c);

    const Matrix& attn = cache.attn[i];
    Matrix d_attn = matmul_nt(d_head, cache.v[i]);
    Matrix d_v = matmul_tn(attn, d_head);
    Matrix d_scores = row_softmax_backward(attn, d_attn);
    d_scores *= inv_sqrt_dk;
    Matrix d_q = matmul(d_scores, cache.k[i]);
    Matrix d_k = matmul_tn(d_scores, cache.q[i]);

    const Matrix& wq_i = params.value(param::head_q(i));
    const Matrix& wk_i = params.value(param::head_k(i));
    const Matrix& wv_i = params.value(param::head_v(i));
    Matrix g_wq(wq_i.rows(), wq_i.cols());
    Matrix g_wk(wk_i.rows(), wk_i.cols());
    Matrix g_wv(wv_i.rows(), wv_i.cols());
    matmul_backward(cache.q_shared, wq_i, d_q, &d_qshared, &g_wq);
    matmul_backward(cache.k_shared, wk_i, d_k, &d_kshared, &g_wk);
    matmul_backward(cache.tokens, wv_i, d_v, nullptr, &g_wv);
    params.accumulate_grad(param::head_q(i), g_wq);
    params.accumulate_grad(param::head_k(i), g_wk);
    params.accumulate_grad(param::head_v(i), g_wv);
  }

  const Matrix& wq = params.value(param::kProjQ);
  const Matrix& wk = params.value(param::kProjK);
  Matrix d_prompts(t, d);
  Matrix g_wq(wq.rows(), wq.cols());
  Matrix g_wk(wk.rows(), wk.cols());
  matmul_backward(cache.prompts, wq, d_qshared, &d_prompts, &g_wq);
  matmul_backward(cache.tokens, wk, d_kshared, nullptr, &g_wk);
  params.accumulate_grad(param::kProjQ, g_wq);
  params.accumulate_grad(param::kProjK, g_wk);
  return d_prompts;
}

std::vector<double> classify(const Matrix& aggregated, const ParamStore& params) {
  const Matrix& w = params.value(param::kClsW);
  const Matrix& b = params.value(param::kClsB);
  if (aggregated.rows() == 0) throw ShapeMismatch("classify needs at least one prompt row");
  if (w.rows() != aggregated.cols()) throw ShapeMismatch("classifier width mismatch");
  const std::size_t d = aggregated.cols();
  std::vector<double> pooled(d, 0.0);
  for (std::size_t r = 0; r < aggregated.rows(); ++r) {
    auto row = aggregated.row(r);
    for (std::size_t c = 0; c < d; ++c) pooled[c] += row[c];
  }
  const double inv = 1.0 / static_cast<double>(aggregated.rows());
  for (auto& v : pooled) v *= inv;

  std::vector<double> logits(w.cols());
  for (std::size_t s = 0; s < w.cols(); ++s) {
    double acc = b(0, s);
    for (std::size_t c = 0; c < d; ++c) acc += pooled[c] * w(c, s);
    logits[s] = acc;
  }
  return logits;
}

Matrix classify_backward(const Matrix& aggregated, std::span<const double> d_logits,
                         ParamStore& params) {
  const Matrix& w = params.value(param::kClsW);
  const std::size_t d = aggregated.cols();
  const std::size_t n_cls = w.cols();
  const double inv = 1.0 / static_cast<double>(aggregated.rows());
  std::vector<double> pooled(d, 0.0);
  for (std::size_t r = 0; r < aggregated.rows(); ++r) {
    auto row = aggregated.row(r);
    for (std::size_t c = 0; c < d; ++c) pooled[c] += row[c];
  }
  for (auto& v : pooled) v *= inv;

  Matrix g_w(d, n_cls);
  Matrix g_b(1, n_cls);
  std::vector<double> d_pooled(d, 0.0);
  for (std::size_t s = 0; s < n_cls; ++s) {
    g_b(0, s) = d_logits[s];
    for (std::size_t c = 0; c < d; ++c) {
      g_w(c, s) = pooled[c] * d_logits[s];
      d_pooled[c] += w(c, s) * d_logits[s];
    }
  }
  params.accumulate_grad(param::kClsW, g_w);
  params.accumulate_grad(param::kClsB, g_b);

  Matrix d_agg(aggregated.rows(), d);
  for (std::size_t r = 0; r < aggregated.rows(); ++r)
    for (std::size_t c = 0; c < d; ++c) d_agg(r, c) = d_pooled[c] * inv;
  return d_agg;
}

}  // namespace focus
