#pragma once

#include <vector>

#include "mitosyn/nn/tensor.hpp"

namespace mitosyn::generator {

// Variance schedule for steps t = 1..T. Vectors are 0-based: beta[t-1] is
// the variance of step t.
struct NoiseSchedule {
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  int steps() const { return static_cast<int>(beta.size()); }
  double beta_at(int t) const { return beta[static_cast<std::size_t>(t - 1)]; }
  double alpha_at(int t) const { return alpha[static_cast<std::size_t>(t - 1)]; }
  double alpha_bar_at(int t) const { return alpha_bar[static_cast<std::size_t>(t - 1)]; }

  // 0 < beta < 1, beta non-decreasing, alpha_bar strictly decreasing in (0, 1).
  bool valid() const;
};

// Linear beta from beta_start to beta_end over T steps; alpha_bar by running product.
NoiseSchedule build_noise_schedule(int steps, double beta_start, double beta_end);

// Closed form x_t = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps.
nn::Matrix forward_diffuse(const nn::Matrix& x0, int t, const nn::Matrix& eps, const NoiseSchedule& schedule);

}  // namespace mitosyn::generator
