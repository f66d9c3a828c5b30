#include "focus/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "focus/errors.hpp"

namespace focus {

Matrix& Tensor2::grad_slot() {
  if (!grad) grad.emplace(value.rows(), value.cols(), 0.0);
  return *grad;
}

void ParamStore::add(const std::string& name, Matrix value, bool trainable) {
  if (params_.count(name) != 0) throw Error("parameter '" + name + "' registered twice");
  Tensor2 t;
  t.value = std::move(value);
  t.requires_grad = trainable;
  params_.emplace(name, std::move(t));
}

Tensor2& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

const Tensor2& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

void ParamStore::accumulate_grad(const std::string& name, const Matrix& g) {
  Tensor2& t = at(name);
  if (!t.requires_grad) return;
  if (!g.same_shape(t.value)) throw ShapeMismatch("gradient shape for '" + name + "'");
  t.grad_slot() += g;
}

void ParamStore::zero_grad() {
  for (auto& [_, t] : params_) t.grad.reset();
}

void ParamStore::set_trainable(const std::string& name, bool trainable) {
  Tensor2& t = at(name);
  t.requires_grad = trainable;
  if (!trainable) t.grad.reset();
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [n, _] : params_) out.push_back(n);
  return out;
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.all_finite()) throw NonFiniteValue(std::string("non-finite value in ") + what);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeMismatch("matmul " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                        " * " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ci = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      auto bk = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
    }
  }
  require_finite(c, "matmul");
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeMismatch("matmul_nt inner dimension mismatch");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = dot(a.row(i), b.row(j));
  require_finite(c, "matmul_nt");
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ShapeMismatch("matmul_tn inner dimension mismatch");
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto ak = a.row(k);
    auto bk = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = ak[i];
      auto ci = c.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aki * bk[j];
    }
  }
  require_finite(c, "matmul_tn");
  return c;
}

void matmul_backward(const Matrix& a, const Matrix& b, const Matrix& d_out, Matrix* d_a,
                     Matrix* d_b) {
  if (d_out.rows() != a.rows() || d_out.cols() != b.cols()) {
    throw ShapeMismatch("matmul_backward upstream gradient shape");
  }
  if (d_a != nullptr) *d_a += matmul_nt(d_out, b);
  if (d_b != nullptr) *d_b += matmul_tn(a, d_out);
}

Matrix row_softmax(const Matrix& a) {
  Matrix s(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto in = a.row(r);
    auto out = s.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      out[c] = std::exp(in[c] - mx);
      z += out[c];
    }
    for (auto& v : out) v /= z;
  }
  require_finite(s, "row_softmax");
  return s;
}

Matrix row_softmax_backward(const Matrix& s, const Matrix& d_s) {
  if (!s.same_shape(d_s)) throw ShapeMismatch("row_softmax_backward shapes");
  Matrix d_a(s.rows(), s.cols());
  for (std::size_t r = 0; r < s.rows(); ++r) {
    auto sr = s.row(r);
    auto gr = d_s.row(r);
    double inner = 0.0;
    for (std::size_t c = 0; c < sr.size(); ++c) inner += sr[c] * gr[c];
    auto out = d_a.row(r);
    for (std::size_t c = 0; c < sr.size(); ++c) out[c] = sr[c] * (gr[c] - inner);
  }
  return d_a;
}

Matrix layer_norm(const Matrix& a, const Matrix& scale, const Matrix& shift,
                  LayerNormCache* cache) {
  const std::size_t n = a.cols();
  if (scale.rows() != 1 || scale.cols() != n || !shift.same_shape(scale)) {
    throw ShapeMismatch("layer_norm affine terms must be 1 x " + std::to_string(n));
  }
  Matrix y(a.rows(), n);
  Matrix xhat(a.rows(), n);
  std::vector<double> inv_std(a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto x = a.row(r);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + kLayerNormEps);
    inv_std[r] = is;
    for (std::size_t c = 0; c < n; ++c) {
      xhat(r, c) = (x[c] - mean) * is;
      y(r, c) = xhat(r, c) * scale(0, c) + shift(0, c);
    }
  }
  require_finite(y, "layer_norm");
  if (cache != nullptr) {
    cache->normalized = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

void layer_norm_backward(const LayerNormCache& cache, const Matrix& scale, const Matrix& d_out,
                         Matrix& d_a, Matrix* d_scale, Matrix* d_shift) {
  const Matrix& xhat = cache.normalized;
  if (!xhat.same_shape(d_out) || !d_a.same_shape(d_out)) {
    throw ShapeMismatch("layer_norm_backward shapes");
  }
  const std::size_t n = xhat.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> g(n);
  for (std::size_t r = 0; r < xhat.rows(); ++r) {
    double sum_g = 0.0;
    double sum_gx = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      g[c] = d_out(r, c) * scale(0, c);
      sum_g += g[c];
      sum_gx += g[c] * xhat(r, c);
      if (d_scale != nullptr) (*d_scale)(0, c) += d_out(r, c) * xhat(r, c);
      if (d_shift != nullptr) (*d_shift)(0, c) += d_out(r, c);
    }
    const double is = cache.inv_std[r];
    for (std::size_t c = 0; c < n; ++c) {
      d_a(r, c) += is * (g[c] - inv_n * sum_g - xhat(r, c) * inv_n * sum_gx);
    }
  }
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double mx = *std::max_element(p.begin(), p.end());
  double z = 0.0;
  for (auto& v : p) {
    v = std::exp(v - mx);
    z += v;
  }
  for (auto& v : p) v /= z;
  return p;
}

CrossEntropyResult cross_entropy(std::span<const double> logits, int label) {
  const int s = static_cast<int>(logits.size());
  if (s < 2) throw ShapeMismatch("cross_entropy needs at least two classes");
  if (label < 0 || label >= s) throw LabelOutOfRange(label, s);
  for (double v : logits) {
    if (!std::isfinite(v)) throw NonFiniteLoss("non-finite logit");
  }
  CrossEntropyResult out;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  const double log_z = mx + std::log(z);
  out.loss = log_z - logits[static_cast<std::size_t>(label)];
  out.probs = softmax(logits);
  out.grad = out.probs;
  out.grad[static_cast<std::size_t>(label)] -= 1.0;
  if (!std::isfinite(out.loss)) throw NonFiniteLoss("non-finite cross-entropy");
  return out;
}

}  // namespace focus
