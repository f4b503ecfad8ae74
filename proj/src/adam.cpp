#include "tsgzsl/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace tsgzsl::core {

Adam::Adam(std::vector<TensorPtr> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const TensorPtr& p : params_) {
    if (!p || !p->requires_grad) {
      throw std::invalid_argument("Adam: every parameter must require grad");
    }
    m_.emplace_back(p->numel(), 0.0);
    v_.emplace_back(p->numel(), 0.0);
  }
}

void Adam::step() {
  for (const TensorPtr& p : params_) {
    if (!p->has_grad) {
      throw std::runtime_error("Adam: missing gradient for parameter '" +
                               (p->name.empty() ? std::string("<unnamed>") : p->name) + "'");
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = *params_[i];
    for (std::size_t k = 0; k < p.numel(); ++k) {
      const double g = p.grad[k];
      m_[i][k] = beta1_ * m_[i][k] + (1.0 - beta1_) * g;
      v_[i][k] = beta2_ * v_[i][k] + (1.0 - beta2_) * g * g;
      const double m_hat = m_[i][k] / bc1;
      const double v_hat = v_[i][k] / bc2;
      p.values[k] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
    p.zero_grad();
  }
}

}  // namespace tsgzsl::core
