#pragma once

#include <span>

#include "mitosyn/nn/tensor.hpp"

namespace mitosyn::classifier {

// Binary cross-entropy on a logit, in the overflow-free form
// max(x, 0) - x*y + log(1 + exp(-|x|)).
double bce_with_logits(double logit, int target);
// d/dlogit = sigmoid(logit) - target.
double bce_with_logits_grad(double logit, int target);
double sigmoid(double logit);

// Batch mean of bce_with_logits over an n x 1 logit column.
nn::Var bce_with_logits_mean(const nn::Var& logits, std::span<const int> targets);

// Cosine annealing with warm restarts at a fixed period:
// floor + (base - floor) * (1 + cos(pi * frac)) / 2, frac = (position mod period) / period.
double cosine_restart_lr(double epoch_position, double base_lr, double period, double floor_lr);

}  // namespace mitosyn::classifier
