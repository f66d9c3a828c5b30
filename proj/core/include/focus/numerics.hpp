#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "focus/matrix.hpp"

namespace focus {

// A parameter tensor and its accumulated gradient. The gradient is absent
// until something accumulates into it; ParamStore::zero_grad clears it.
struct Tensor2 {
  Matrix value;
  std::optional<Matrix> grad;
  bool requires_grad = true;

  std::size_t rows() const noexcept { return value.rows(); }
  std::size_t cols() const noexcept { return value.cols(); }
  // Gradient slot, zero-initialized on first use.
  Matrix& grad_slot();
};

// Named parameters, iterated in sorted name order.
class ParamStore {
 public:
  // Throws focus::Error on a duplicate name.
  void add(const std::string& name, Matrix value, bool trainable = true);

  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  Tensor2& at(const std::string& name);
  const Tensor2& at(const std::string& name) const;
  const Matrix& value(const std::string& name) const { return at(name).value; }

  // Adds g into the named gradient. No-op for frozen tensors.
  void accumulate_grad(const std::string& name, const Matrix& g);
  void zero_grad();
  void set_trainable(const std::string& name, bool trainable);

  std::map<std::string, Tensor2>& entries() noexcept { return params_; }
  const std::map<std::string, Tensor2>& entries() const noexcept { return params_; }
  std::vector<std::string> names() const;
  std::size_t size() const noexcept { return params_.size(); }

 private:
  std::map<std::string, Tensor2> params_;
};

// Throws NonFiniteValue naming `what` when any entry is NaN or Inf.
void require_finite(const Matrix& m, const char* what);

Matrix matmul(const Matrix& a, const Matrix& b);     // a * b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a * b^T
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a^T * b

// Given C = A * B and dL/dC, accumulates dL/dA and dL/dB into the non-null
// outputs (which must already have the right shape).
void matmul_backward(const Matrix& a, const Matrix& b, const Matrix& d_out, Matrix* d_a,
                     Matrix* d_b);

// Softmax along each row, max-shifted.
Matrix row_softmax(const Matrix& a);
// dL/dA for S = row_softmax(A), given S and dL/dS.
Matrix row_softmax_backward(const Matrix& s, const Matrix& d_s);

struct LayerNormCache {
  Matrix normalized;  // pre-affine output
  std::vector<double> inv_std;
};

inline constexpr double kLayerNormEps = 1e-5;

// Per-row normalization over the feature axis, then y = xhat * scale + shift
// with scale and shift of shape 1 x cols.
Matrix layer_norm(const Matrix& a, const Matrix& scale, const Matrix& shift,
                  LayerNormCache* cache = nullptr);
// Accumulates into d_a (required) and d_scale / d_shift (optional).
void layer_norm_backward(const LayerNormCache& cache, const Matrix& scale, const Matrix& d_out,
                         Matrix& d_a, Matrix* d_scale, Matrix* d_shift);

std::vector<double> softmax(std::span<const double> logits);

struct CrossEntropyResult {
  double loss = 0.0;
  std::vector<double> probs;
  std::vector<double> grad;  // probs - onehot(label)
};

// -log softmax(logits)[label]. Needs at least two classes.
CrossEntropyResult cross_entropy(std::span<const double> logits, int label);

}  // namespace focus
