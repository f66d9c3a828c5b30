#pragma once

#include <cstddef>
#include <map>
#include <string>

#include "focus/matrix.hpp"
#include "focus/numerics.hpp"

namespace focus {

struct AdamWOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// AdamW with decoupled weight decay:
//   p <- p - lr * wd * p
//   m <- b1 m + (1 - b1) g,   v <- b2 v + (1 - b2) g^2
//   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
// Moments are keyed by parameter name.
class AdamW {
 public:
  explicit AdamW(AdamWOptions options = {}) : options_(options) {}

  // Updates every trainable tensor, then clears all gradients. Throws
  // MissingGradient if a trainable tensor has none.
  void step(ParamStore& params);

  std::size_t step_count() const noexcept { return step_; }
  const AdamWOptions& options() const noexcept { return options_; }

 private:
  struct Moments {
    Matrix m;
    Matrix v;
  };
  AdamWOptions options_;
  std::size_t step_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace focus
