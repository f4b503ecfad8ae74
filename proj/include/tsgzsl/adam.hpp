#pragma once

#include <cstddef>
#include <vector>

#include "tsgzsl/tensor.hpp"

namespace tsgzsl::core {

/// Adam with bias correction. Per-parameter moment buffers are keyed by
/// registration order; `step()` consumes and clears the gradients.
class Adam {
public:
  explicit Adam(std::vector<TensorPtr> params, double lr = 1e-3, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);

  void step();
  std::size_t step_count() const { return t_; }
  double learning_rate() const { return lr_; }

private:
  std::vector<TensorPtr> params_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
  double lr_, beta1_, beta2_, eps_;
};

/// Spec-level entry point; equivalent to opt.step().
inline void adam_step(Adam& opt) { opt.step(); }

}  // namespace tsgzsl::core
