#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "semsplat/errors.hpp"

namespace semsplat {

/// Adam moments for one flat parameter block.
class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void reset(std::size_t n) {
    m_.assign(n, 0.0);
    v_.assign(n, 0.0);
    t_ = 0;
  }

  /// Grows the moment buffers with zeros, e.g. after parameters are appended.
  void grow(std::size_t n) {
    if (n > m_.size()) {
      m_.resize(n, 0.0);
      v_.resize(n, 0.0);
    }
  }

  void step(std::span<double> params, std::span<const double> grads) {
    require(params.size() == grads.size(), "Adam: parameter/gradient size mismatch");
    if (m_.size() != params.size()) {
      if (m_.size() < params.size()) grow(params.size());
      else reset(params.size());
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = grads[i];
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
  }

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

}  // namespace semsplat
