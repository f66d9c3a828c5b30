#include "focus/optim.hpp"

#include <cmath>

#include "focus/errors.hpp"

namespace focus {

void AdamW::step(ParamStore& params) {
  for (const auto& [name, t] : params.entries()) {
    if (t.requires_grad && !t.grad) throw MissingGradient(name);
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const double bc1 = 1.0 - std::pow(options_.beta1, t);
  const double bc2 = 1.0 - std::pow(options_.beta2, t);

  for (auto& [name, tensor] : params.entries()) {
    if (!tensor.requires_grad) continue;
    const Matrix& g = *tensor.grad;
    require_finite(g, name.c_str());
    auto [it, inserted] = moments_.try_emplace(name);
    if (inserted) {
      it->second.m = Matrix(g.rows(), g.cols());
      it->second.v = Matrix(g.rows(), g.cols());
    }
    auto p = tensor.value.values();
    auto m = it->second.m.values();
    auto v = it->second.v.values();
    auto gv = g.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] -= options_.lr * options_.weight_decay * p[i];
      m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * gv[i];
      v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * gv[i] * gv[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= options_.lr * m_hat / (std::sqrt(v_hat) + options_.eps);
    }
  }
  params.zero_grad();
}

}  // namespace focus
