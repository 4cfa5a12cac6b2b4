#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace trojanrec::models::detail {

// Adam over a fixed list of parameter tensors (matrices or vectors).
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  template <typename Derived, typename GradDerived>
  void update(std::size_t slot, Eigen::PlainObjectBase<Derived>& param,
              const Eigen::PlainObjectBase<GradDerived>& grad) {
    if (slot >= m_.size()) {
      m_.resize(slot + 1);
      v_.resize(slot + 1);
    }
    auto p = Eigen::Map<Eigen::ArrayXd>(param.data(), param.size());
    auto g = Eigen::Map<const Eigen::ArrayXd>(grad.data(), grad.size());
    if (m_[slot].size() != g.size()) {
      m_[slot] = Eigen::ArrayXd::Zero(g.size());
      v_[slot] = Eigen::ArrayXd::Zero(g.size());
    }
    m_[slot] = beta1_ * m_[slot] + (1.0 - beta1_) * g;
    v_[slot] = beta2_ * v_[slot] + (1.0 - beta2_) * g.square();
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    p -= lr_ * (m_[slot] / c1) / ((v_[slot] / c2).sqrt() + eps_);
  }

  // Call once per optimisation step, before the update() calls of that step.
  void begin_step() { ++step_; }

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  long step_ = 0;
  std::vector<Eigen::ArrayXd> m_;
  std::vector<Eigen::ArrayXd> v_;
};

}  // namespace trojanrec::models::detail
