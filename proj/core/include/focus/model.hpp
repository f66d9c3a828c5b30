#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "focus/config.hpp"
#include "focus/gradcheck.hpp"
#include "focus/matrix.hpp"
#include "focus/numerics.hpp"
#include "focus/parallel.hpp"
#include "focus/types.hpp"

namespace focus {

struct PipelineOutput {
  std::vector<double> logits;
  CompressionTrace trace;
};

// A bag after the parameter-free redundancy stage (or its bypass). Training
// computes this once per bag and reuses it every epoch.
struct PreparedBag {
  FeatureBag bag;
  CompressionTrace trace;
};

// Gated attention pooling used by the heads without cross-modal aggregation:
//   e_j = w^T (tanh(V^T b_j) * sigmoid(U^T b_j)),  a = softmax(e),  z = sum_j a_j b_j
struct PoolCache {
  Matrix tanh_act;     // N x L
  Matrix sigmoid_act;  // N x L
  Matrix attn;         // 1 x N
};
std::vector<double> attention_pool(const Matrix& tokens, const ParamStore& params,
                                   PoolCache* cache = nullptr);
// Accumulates pool.{v,u,w} gradients for dL/dz. Tokens are constants.
void attention_pool_backward(const Matrix& tokens, const PoolCache& cache,
                             std::span<const double> d_pooled, ParamStore& params);

// Prompt-similarity head: logits_c = (z W_p) . g_c + beta_c, where
// g_c = T^P_c + mean(T^L) (just T^P_c without learnable rows).
Matrix class_text_features(const Matrix& knowledge, const Matrix* learnable);
std::vector<double> prompt_head(std::span<const double> pooled, const Matrix& text_features,
                                const ParamStore& params);

// Full pipeline as one stateless call: redundancy -> prioritize -> sequential
// compression -> head, honoring the ablation flags (a bypassed stage is the
// identity and is recorded as such in the trace). `prompts.learnable` stands
// in for the stored learnable rows.
PipelineOutput forward_pipeline(const FeatureBag& bag, const PromptSet& prompts,
                                const ParamStore& params, const RunConfig& config);

// Parameters plus the frozen knowledge prompts for one run configuration.
// Registered tensors depend on the ablation flags; see the constructor.
class FocusModel {
 public:
  FocusModel(const RunConfig& config, Matrix knowledge_prompts, std::size_t num_classes,
             std::uint64_t init_seed);
  // Wraps existing parameters (e.g. from a checkpoint). Throws if the names
  // or shapes differ from what the configuration registers.
  FocusModel(const RunConfig& config, Matrix knowledge_prompts, std::size_t num_classes,
             ParamStore params);

  const RunConfig& config() const noexcept { return config_; }
  ParamStore& params() noexcept { return params_; }
  const ParamStore& params() const noexcept { return params_; }
  const Matrix& knowledge() const noexcept { return knowledge_; }
  std::size_t dim() const noexcept { return knowledge_.cols(); }
  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t learnable_rows() const;

  // [T^L; T^P] with the current learnable rows.
  Matrix prompt_rows() const;
  PromptSet prompt_set() const;

  PreparedBag prepare(const FeatureBag& bag, Execution exec = Execution::Sequential) const;

  PipelineOutput forward(const FeatureBag& bag) const;
  PipelineOutput forward(const PreparedBag& prepared) const;

  double loss(const PreparedBag& prepared, int label) const;
  // Forward, cross-entropy and backward; gradients accumulate into params().
  double loss_and_grad(const PreparedBag& prepared, int label);

 private:
  void register_params(std::uint64_t init_seed);

  RunConfig config_;
  Matrix knowledge_;
  std::size_t num_classes_;
  ParamStore params_;
};

// Finite-difference check of every trainable tensor of `model` on one bag.
GradCheckReport check_model_gradients(FocusModel& model, const FeatureBag& bag, int label,
                                      const GradCheckOptions& options = {});

}  // namespace focus
