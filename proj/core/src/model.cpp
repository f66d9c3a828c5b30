#include "focus/model.hpp"

#include <cmath>

#include "focus/aggregator.hpp"
#include "focus/errors.hpp"
#include "focus/prioritize.hpp"
#include "focus/redundancy.hpp"
#include "focus/rng.hpp"
#include "focus/seqcompress.hpp"

namespace focus {

std::vector<double> attention_pool(const Matrix& tokens, const ParamStore& params,
                                   PoolCache* cache) {
  Matrix g = matmul(tokens, params.value(param::kPoolV));
  Matrix s = matmul(tokens, params.value(param::kPoolU));
  const Matrix& w = params.value(param::kPoolW);
  const std::size_t n = tokens.rows();
  const std::size_t hidden = g.cols();
  Matrix scores(1, n);
  for (std::size_t j = 0; j < n; ++j) {
    double e = 0.0;
    for (std::size_t l = 0; l < hidden; ++l) {
      g(j, l) = std::tanh(g(j, l));
      s(j, l) = 1.0 / (1.0 + std::exp(-s(j, l)));
      e += g(j, l) * s(j, l) * w(l, 0);
    }
    scores(0, j) = e;
  }
  Matrix attn = row_softmax(scores);
  std::vector<double> pooled(tokens.cols(), 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double a = attn(0, j);
    auto b = tokens.row(j);
    for (std::size_t c = 0; c < pooled.size(); ++c) pooled[c] += a * b[c];
  }
  if (cache != nullptr) {
    cache->tanh_act = std::move(g);
    cache->sigmoid_act = std::move(s);
    cache->attn = std::move(attn);
  }
  return pooled;
}

void attention_pool_backward(const Matrix& tokens, const PoolCache& cache,
                             std::span<const double> d_pooled, ParamStore& params) {
  const std::size_t n = tokens.rows();
  const Matrix& g = cache.tanh_act;
  const Matrix& s = cache.sigmoid_act;
  const Matrix& w = params.value(param::kPoolW);
  const std::size_t hidden = g.cols();

  Matrix d_attn(1, n);
  for (std::size_t j = 0; j < n; ++j) d_attn(0, j) = dot(d_pooled, tokens.row(j));
  Matrix d_scores = row_softmax_backward(cache.attn, d_attn);

  Matrix g_w(hidden, 1);
  Matrix d_pre_v(n, hidden);
  Matrix d_pre_u(n, hidden);
  for (std::size_t j = 0; j < n; ++j) {
    const double de = d_scores(0, j);
    for (std::size_t l = 0; l < hidden; ++l) {
      const double gl = g(j, l);
      const double sl = s(j, l);
      g_w(l, 0) += de * gl * sl;
      const double dh = de * w(l, 0);
      d_pre_v(j, l) = dh * sl * (1.0 - gl * gl);
      d_pre_u(j, l) = dh * gl * sl * (1.0 - sl);
    }
  }
  params.accumulate_grad(param::kPoolW, g_w);
  params.accumulate_grad(param::kPoolV, matmul_tn(tokens, d_pre_v));
  params.accumulate_grad(param::kPoolU, matmul_tn(tokens, d_pre_u));
}

Matrix class_text_features(const Matrix& knowledge, const Matrix* learnable) {
  Matrix g = knowledge;
  if (learnable != nullptr && learnable->rows() > 0) {
    const double inv = 1.0 / static_cast<double>(learnable->rows());
    for (std::size_t c = 0; c < g.cols(); ++c) {
      double mean = 0.0;
      for (std::size_t r = 0; r < learnable->rows(); ++r) mean += (*learnable)(r, c);
      mean *= inv;
      for (std::size_t s = 0; s < g.rows(); ++s) g(s, c) += mean;
    }
  }
  return g;
}

std::vector<double> prompt_head(std::span<const double> pooled, const Matrix& text_features,
                                const ParamStore& params) {
  const Matrix& wp = params.value(param::kTextProj);
  const Matrix& b = params.value(param::kClsB);
  Matrix z(1, pooled.size(), std::vector<double>(pooled.begin(), pooled.end()));
  Matrix y = matmul(z, wp);
  std::vector<double> logits(text_features.rows());
  for (std::size_t s = 0; s < logits.size(); ++s) {
    logits[s] = dot(y.row(0), text_features.row(s)) + b(0, s);
  }
  return logits;
}

namespace {

struct HeadCache {
  Matrix tokens;
  AggregatorCache agg;
  Matrix aggregated;
  PoolCache pool;
  std::vector<double> pooled;
  Matrix text;
  Matrix projected;  // z W_p
};

void check_input(const FeatureBag& bag, std::size_t d) {
  bag.validate();
  if (bag.dim() != d) {
    throw ShapeMismatch("bag '" + bag.id + "' has width " + std::to_string(bag.dim()) +
                        ", model expects " + std::to_string(d));
  }
}

PreparedBag prepare_impl(const FeatureBag& bag, const RunConfig& config, Execution exec) {
  PreparedBag out;
  out.trace.input_indices = bag.patch_indices;
  if (config.ablation.kavtc) {
    auto [filtered, rec] = remove_global_redundancy(bag, config.w, exec);
    out.bag = std::move(filtered);
    out.trace.stage_records.push_back(std::move(rec));
  } else {
    StageRecord rec;
    rec.stage_name = "redundancy";
    rec.threshold_used = std::nan("");
    rec.input_size = bag.size();
    rec.retained_original_indices = bag.patch_indices;
    rec.bypassed = true;
    out.bag = bag;
    out.trace.stage_records.push_back(std::move(rec));
  }
  return out;
}

StageRecord bypass_record(const std::string& name, const FeatureBag& bag) {
  StageRecord rec;
  rec.stage_name = name;
  rec.threshold_used = std::nan("");
  rec.input_size = bag.size();
  rec.retained_original_indices = bag.patch_indices;
  rec.bypassed = true;
  return rec;
}

// Stages 2 and 3; appends their records to `trace`.
FeatureBag compress_rest(const PreparedBag& prepared, const Matrix& prompt_rows,
                         const ParamStore& params, const RunConfig& config,
                         CompressionTrace& trace) {
  FeatureBag current = prepared.bag;
  if (config.ablation.kavtc) {
    auto [selected, rec] =
        prioritize_tokens(current, prompt_rows, params.value(param::kProjQ),
                          params.value(param::kProjK), config.gamma, config.m_max);
    current = std::move(selected);
    trace.stage_records.push_back(std::move(rec));
  } else {
    trace.stage_records.push_back(bypass_record("prioritize", current));
  }
  if (config.ablation.svtc) {
    const auto schedule =
        StageSchedule::linear(config.theta_base, config.delta_theta, config.n_stages);
    auto [compressed, recs] = compress_sequential(current, schedule);
    current = std::move(compressed);
    for (auto& r : recs) trace.stage_records.push_back(std::move(r));
  } else {
    trace.stage_records.push_back(bypass_record("svtc", current));
  }
  trace.check_subset_chain();
  return current;
}

std::vector<double> head_forward(const Matrix& tokens, const Matrix& prompt_rows,
                                 const Matrix& knowledge, const Matrix* learnable,
                                 const ParamStore& params, const RunConfig& config,
                                 HeadCache* cache) {
  if (config.ablation.crossagg) {
    AggregatorCache* agg_cache = cache ? &cache->agg : nullptr;
    Matrix o = aggregate(tokens, prompt_rows, params, config.heads, agg_cache);
    auto logits = classify(o, params);
    if (cache != nullptr) cache->aggregated = std::move(o);
    return logits;
  }
  PoolCache* pool_cache = cache ? &cache->pool : nullptr;
  auto pooled = attention_pool(tokens, params, pool_cache);
  std::vector<double> logits;
  if (config.ablation.prompt) {
    Matrix text = class_text_features(knowledge, learnable);
    logits = prompt_head(pooled, text, params);
    if (cache != nullptr) {
      cache->text = std::move(text);
      Matrix z(1, pooled.size(), pooled);
      cache->projected = matmul(z, params.value(param::kTextProj));
    }
  } else {
    const Matrix& w = params.value(param::kClsW);
    const Matrix& b = params.value(param::kClsB);
    logits.assign(w.cols(), 0.0);
    for (std::size_t s = 0; s < w.cols(); ++s) {
      double acc = b(0, s);
      for (std::size_t c = 0; c < pooled.size(); ++c) acc += pooled[c] * w(c, s);
      logits[s] = acc;
    }
  }
  if (cache != nullptr) cache->pooled = std::move(pooled);
  return logits;
}

}  // namespace

PipelineOutput forward_pipeline(const FeatureBag& bag, const PromptSet& prompts,
                                const ParamStore& params, const RunConfig& config) {
  config.validate_for_dim(bag.dim());
  prompts.validate();
  check_input(bag, prompts.knowledge.cols());
  PreparedBag prepared = prepare_impl(bag, config, Execution::Sequential);
  const Matrix rows = prompts.concatenated();
  PipelineOutput out;
  out.trace = std::move(prepared.trace);
  FeatureBag compressed = compress_rest(prepared, rows, params, config, out.trace);
  const Matrix* learnable = prompts.learnable.rows() > 0 ? &prompts.learnable : nullptr;
  out.logits =
      head_forward(compressed.features, rows, prompts.knowledge, learnable, params, config, nullptr);
  return out;
}

FocusModel::FocusModel(const RunConfig& config, Matrix knowledge_prompts, std::size_t num_classes,
                       std::uint64_t init_seed)
    : config_(config), knowledge_(std::move(knowledge_prompts)), num_classes_(num_classes) {
  config_.validate_for_dim(knowledge_.cols());
  if (num_classes_ < 2) throw ConfigError("need at least two classes");
  if (knowledge_.rows() == 0) throw ConfigError("need at least one knowledge prompt row");
  register_params(init_seed);
}

FocusModel::FocusModel(const RunConfig& config, Matrix knowledge_prompts, std::size_t num_classes,
                       ParamStore params)
    : FocusModel(config, std::move(knowledge_prompts), num_classes, std::uint64_t{0}) {
  for (const auto& [name, t] : params_.entries()) {
    if (!params.contains(name)) throw ConfigError("checkpoint lacks parameter '" + name + "'");
    if (!params.value(name).same_shape(t.value)) {
      throw ShapeMismatch("checkpoint parameter '" + name + "' has the wrong shape");
    }
  }
  for (const auto& name : params.names()) {
    if (!params_.contains(name)) {
      throw ConfigError("checkpoint parameter '" + name + "' unused by this configuration");
    }
  }
  for (auto& [name, t] : params_.entries()) t.value = params.value(name);
}

void FocusModel::register_params(std::uint64_t init_seed) {
  CounterRng rng(init_seed);
  const std::size_t d = dim();
  const auto& ab = config_.ablation;
  const bool prompt_head_on = !ab.crossagg && ab.prompt;
  const bool uses_projections = ab.kavtc || ab.crossagg;
  const bool uses_learnable = config_.t2 > 0 && (uses_projections || prompt_head_on);

  if (prompt_head_on && knowledge_.rows() != num_classes_) {
    throw ConfigError("prompt-similarity head needs one knowledge row per class");
  }
  if (uses_learnable) {
    params_.add(param::kLearnablePrompts, init_normal(config_.t2, d, rng),
                ab.crossagg || prompt_head_on);
  }
  if (uses_projections) {
    params_.add(param::kProjQ, Matrix::identity(d), ab.crossagg);
    params_.add(param::kProjK, Matrix::identity(d), ab.crossagg);
  }
  if (ab.crossagg) {
    register_aggregator_params(params_, d, config_.heads, num_classes_, rng);
    return;
  }
  const std::size_t hidden = std::max<std::size_t>(1, d / 2);
  params_.add(param::kPoolV, init_normal(d, hidden, rng));
  params_.add(param::kPoolU, init_normal(d, hidden, rng));
  params_.add(param::kPoolW, init_normal(hidden, 1, rng));
  if (prompt_head_on) {
    params_.add(param::kTextProj, Matrix::identity(d));
  } else {
    params_.add(param::kClsW, init_normal(d, num_classes_, rng));
  }
  params_.add(param::kClsB, Matrix(1, num_classes_, 0.0));
}

std::size_t FocusModel::learnable_rows() const {
  return params_.contains(param::kLearnablePrompts)
             ? params_.value(param::kLearnablePrompts).rows()
             : 0;
}

Matrix FocusModel::prompt_rows() const {
  if (learnable_rows() == 0) return knowledge_;
  return vstack(params_.value(param::kLearnablePrompts), knowledge_);
}

PromptSet FocusModel::prompt_set() const {
  PromptSet p;
  p.knowledge = knowledge_;
  if (learnable_rows() > 0) p.learnable = params_.value(param::kLearnablePrompts);
  else p.learnable = Matrix(0, dim());
  return p;
}

PreparedBag FocusModel::prepare(const FeatureBag& bag, Execution exec) const {
  check_input(bag, dim());
  return prepare_impl(bag, config_, exec);
}

PipelineOutput FocusModel::forward(const FeatureBag& bag) const { return forward(prepare(bag)); }

PipelineOutput FocusModel::forward(const PreparedBag& prepared) const {
  const Matrix rows = prompt_rows();
  PipelineOutput out;
  out.trace = prepared.trace;
  FeatureBag compressed = compress_rest(prepared, rows, params_, config_, out.trace);
  const Matrix* learnable =
      learnable_rows() > 0 ? &params_.value(param::kLearnablePrompts) : nullptr;
  out.logits =
      head_forward(compressed.features, rows, knowledge_, learnable, params_, config_, nullptr);
  return out;
}

double FocusModel::loss(const PreparedBag& prepared, int label) const {
  return cross_entropy(forward(prepared).logits, label).loss;
}

double FocusModel::loss_and_grad(const PreparedBag& prepared, int label) {
  const Matrix rows = prompt_rows();
  CompressionTrace trace = prepared.trace;
  FeatureBag compressed = compress_rest(prepared, rows, params_, config_, trace);
  const Matrix* learnable =
      learnable_rows() > 0 ? &params_.value(param::kLearnablePrompts) : nullptr;
  HeadCache cache;
  const auto logits =
      head_forward(compressed.features, rows, knowledge_, learnable, params_, config_, &cache);
  const auto ce = cross_entropy(logits, label);
  const auto& ab = config_.ablation;
  const std::size_t t2 = learnable_rows();

  if (ab.crossagg) {
    Matrix d_o = classify_backward(cache.aggregated, ce.grad, params_);
    Matrix d_rows = aggregate_backward(cache.agg, d_o, params_, config_.heads);
    if (t2 > 0) {
      Matrix d_learn(t2, dim());
      for (std::size_t r = 0; r < t2; ++r)
        for (std::size_t c = 0; c < dim(); ++c) d_learn(r, c) = d_rows(r, c);
      params_.accumulate_grad(param::kLearnablePrompts, d_learn);
    }
    return ce.loss;
  }

  std::vector<double> d_pooled(dim(), 0.0);
  if (ab.prompt) {
    const Matrix& text = cache.text;
    const Matrix& wp = params_.value(param::kTextProj);
    const std::size_t n_cls = text.rows();
    std::vector<double> d_y(dim(), 0.0);
    for (std::size_t s = 0; s < n_cls; ++s)
      for (std::size_t c = 0; c < dim(); ++c) d_y[c] += ce.grad[s] * text(s, c);
    Matrix g_wp(dim(), dim());
    for (std::size_t i = 0; i < dim(); ++i)
      for (std::size_t j = 0; j < dim(); ++j) g_wp(i, j) = cache.pooled[i] * d_y[j];
    params_.accumulate_grad(param::kTextProj, g_wp);
    for (std::size_t i = 0; i < dim(); ++i) d_pooled[i] = dot(wp.row(i), d_y);
    Matrix g_b(1, n_cls);
    for (std::size_t s = 0; s < n_cls; ++s) g_b(0, s) = ce.grad[s];
    params_.accumulate_grad(param::kClsB, g_b);
    if (t2 > 0) {
      // Every learnable row shifts every class feature by 1/t2 of itself.
      std::vector<double> d_mean(dim(), 0.0);
      for (std::size_t s = 0; s < n_cls; ++s)
        for (std::size_t c = 0; c < dim(); ++c) d_mean[c] += ce.grad[s] * cache.projected(0, c);
      Matrix d_learn(t2, dim());
      const double inv = 1.0 / static_cast<double>(t2);
      for (std::size_t r = 0; r < t2; ++r)
        for (std::size_t c = 0; c < dim(); ++c) d_learn(r, c) = d_mean[c] * inv;
      params_.accumulate_grad(param::kLearnablePrompts, d_learn);
    }
  } else {
    const Matrix& w = params_.value(param::kClsW);
    Matrix g_w(dim(), w.cols());
    Matrix g_b(1, w.cols());
    for (std::size_t s = 0; s < w.cols(); ++s) {
      g_b(0, s) = ce.grad[s];
      for (std::size_t c = 0; c < dim(); ++c) {
        g_w(c, s) = cache.pooled[c] * ce.grad[s];
        d_pooled[c] += w(c, s) * ce.grad[s];
      }
    }
    params_.accumulate_grad(param::kClsW, g_w);
    params_.accumulate_grad(param::kClsB, g_b);
  }
  attention_pool_backward(compressed.features, cache.pool, d_pooled, params_);
  return ce.loss;
}

GradCheckReport check_model_gradients(FocusModel& model, const FeatureBag& bag, int label,
                                      const GradCheckOptions& options) {
  const PreparedBag prepared = model.prepare(bag);
  const LossClosure closure = [&](ParamStore&, bool with_grad) {
    return with_grad ? model.loss_and_grad(prepared, label) : model.loss(prepared, label);
  };
  return grad_check(closure, model.params(), options);
}

}  // namespace focus
