#pragma once

#include <cmath>
#include <vector>

#include "mmk/autodiff.hpp"

namespace mmk {

/// Linear warm-up to `peak` over `warmupSteps`, then constant.
inline double warmupLearningRate(long step, double peak, long warmupSteps) {
  if (warmupSteps <= 0) return peak;
  const double frac = static_cast<double>(step) / static_cast<double>(warmupSteps);
  return peak * std::min(1.0, std::max(0.0, frac));
}

class Adam {
 public:
  Adam(std::vector<ad::Parameter*> params, double beta1 = 0.9, double beta2 = 0.99, double eps = 1e-8)
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto* p : params_) {
      m_.push_back(ad::Mat::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(ad::Mat::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void zeroGrad() {
    for (auto* p : params_) p->zeroGrad();
  }

  void step(double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const ad::Mat& g = params_[i]->grad;
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
      if (lr == 0.0) continue;
      params_[i]->value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    }
  }

  long steps() const { return t_; }

 private:
  std::vector<ad::Parameter*> params_;
  std::vector<ad::Mat> m_;
  std::vector<ad::Mat> v_;
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
};

} // namespace mmk
