#include "mitosyn/nn/optim.hpp"

#include <cmath>

namespace mitosyn::nn {

Optimizer::Optimizer(const NamedParams& params) {
  for (const auto& [name, v] : params) {
    params_.push_back(v);
    m_.push_back(Matrix::Zero(v.rows(), v.cols()));
    v_.push_back(Matrix::Zero(v.rows(), v.cols()));
  }
}

void Optimizer::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

AdamW::AdamW(const NamedParams& params, Options options) : Optimizer(params), opt_(options) {}

void AdamW::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  const float b1 = static_cast<float>(opt_.beta1), b2 = static_cast<float>(opt_.beta2);
  const float step_size = static_cast<float>(lr / bc1);
  const float inv_sqrt_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));
  const float eps = static_cast<float>(opt_.eps);
  const float decay = static_cast<float>(1.0 - lr * opt_.weight_decay);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Var& p = params_[i];
    if (!p.has_grad()) continue;
    const Matrix& g = p.grad();
    m_[i] = b1 * m_[i] + (1.0f - b1) * g;
    v_[i] = b2 * v_[i] + (1.0f - b2) * g.cwiseProduct(g);
    Matrix& w = p.mutable_value();
    w *= decay;
    w.array() -= step_size * m_[i].array() / (v_[i].array().sqrt() * inv_sqrt_bc2 + eps);
  }
}

NAdam::NAdam(const NamedParams& params, Options options) : Optimizer(params), opt_(options) {}

void NAdam::step(double lr) {
  ++t_;
  const double t = static_cast<double>(t_);
  const double mu = opt_.beta1 * (1.0 - 0.5 * std::pow(0.96, t * opt_.momentum_decay));
  const double mu_next = opt_.beta1 * (1.0 - 0.5 * std::pow(0.96, (t + 1.0) * opt_.momentum_decay));
  mu_product_ *= mu;
  const double bc2 = 1.0 - std::pow(opt_.beta2, t);
  const float grad_coef = static_cast<float>(lr * (1.0 - mu) / (1.0 - mu_product_));
  const float mom_coef = static_cast<float>(lr * mu_next / (1.0 - mu_product_ * mu_next));
  const float b1 = static_cast<float>(opt_.beta1), b2 = static_cast<float>(opt_.beta2);
  const float inv_sqrt_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));
  const float eps = static_cast<float>(opt_.eps);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Var& p = params_[i];
    if (!p.has_grad()) continue;
    Matrix g = p.grad();
    if (opt_.weight_decay != 0.0) g += static_cast<float>(opt_.weight_decay) * p.value();
    m_[i] = b1 * m_[i] + (1.0f - b1) * g;
    v_[i] = b2 * v_[i] + (1.0f - b2) * g.cwiseProduct(g);
    const auto denom = (v_[i].array().sqrt() * inv_sqrt_bc2 + eps).eval();
    p.mutable_value().array() -= grad_coef * g.array() / denom + mom_coef * m_[i].array() / denom;
  }
}

}  // namespace mitosyn::nn
