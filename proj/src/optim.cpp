#include "polyparse/optim.hpp"

#include <cmath>

namespace polyparse {

double clip_grad_norm(ad::ParameterSet& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) sq += p.grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double k = max_norm / norm;
    for (auto& p : params) p.grad *= k;
  }
  return norm;
}

Adagrad::Adagrad(const ad::ParameterSet& params, double lr, double initial_accumulator) : lr_(lr) {
  for (const auto& p : params) accum_.push_back(Matrix::Constant(p.value.rows(), p.value.cols(), initial_accumulator));
}

void Adagrad::step(ad::ParameterSet& params) {
  std::size_t i = 0;
  for (auto& p : params) {
    accum_[i].array() += p.grad.array().square();
    p.value.array() -= lr_ * p.grad.array() / accum_[i].array().sqrt();
    ++i;
  }
}

Adam::Adam(const ad::ParameterSet& params, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params) {
    m_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    v_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  }
}

void Adam::step(ad::ParameterSet& params) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  std::size_t i = 0;
  for (auto& p : params) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    ++i;
  }
}

}  // namespace polyparse
