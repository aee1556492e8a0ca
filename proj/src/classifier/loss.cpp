#include "mitosyn/classifier/loss.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "mitosyn/core/error.hpp"

namespace mitosyn::classifier {
namespace {

void check_target(int target) {
  if (target != 0 && target != 1) throw ValidationError("BCE target must be 0 or 1");
}

}  // namespace

double sigmoid(double logit) {
  if (logit >= 0) return 1.0 / (1.0 + std::exp(-logit));
  const double e = std::exp(logit);
  return e / (1.0 + e);
}

double bce_with_logits(double logit, int target) {
  check_target(target);
  if (!std::isfinite(logit)) throw ValidationError("BCE logit must be finite");
  return std::max(logit, 0.0) - logit * target + std::log1p(std::exp(-std::abs(logit)));
}

double bce_with_logits_grad(double logit, int target) {
  check_target(target);
  return sigmoid(logit) - target;
}

nn::Var bce_with_logits_mean(const nn::Var& logits, std::span<const int> targets) {
  if (logits.cols() != 1 || logits.rows() != static_cast<nn::Index>(targets.size())) {
    throw ValidationError("BCE: logits must be an n x 1 column matching the targets");
  }
  const auto n = static_cast<double>(targets.size());
  double total = 0.0;
  nn::Matrix grad(logits.rows(), 1);
  for (nn::Index i = 0; i < logits.rows(); ++i) {
    const double x = logits.value()(i, 0);
    const int y = targets[static_cast<std::size_t>(i)];
    total += bce_with_logits(x, y);
    grad(i, 0) = static_cast<float>(bce_with_logits_grad(x, y) / n);
  }
  nn::Matrix out(1, 1);
  out(0, 0) = static_cast<float>(total / n);
  return nn::Var::from_op(std::move(out), {logits}, [grad](nn::Node& self) {
    self.parents[0]->accumulate(grad * self.grad(0, 0));
  });
}

double cosine_restart_lr(double epoch_position, double base_lr, double period, double floor_lr) {
  if (!(period > 0.0)) throw ValidationError("scheduler period must be positive");
  if (!(epoch_position >= 0.0)) throw ValidationError("epoch position must be non-negative");
  const double frac = std::fmod(epoch_position, period) / period;
  return floor_lr + 0.5 * (base_lr - floor_lr) * (1.0 + std::cos(std::numbers::pi * frac));
}

}  // namespace mitosyn::classifier
