#include "mitosyn/generator/schedule.hpp"

#include <cmath>

#include "mitosyn/core/error.hpp"

namespace mitosyn::generator {

bool NoiseSchedule::valid() const {
  if (beta.empty() || alpha.size() != beta.size() || alpha_bar.size() != beta.size()) return false;
  for (std::size_t i = 0; i < beta.size(); ++i) {
    if (!(beta[i] > 0.0 && beta[i] < 1.0)) return false;
    if (i > 0 && beta[i] < beta[i - 1]) return false;
    if (!(alpha_bar[i] > 0.0 && alpha_bar[i] < 1.0)) return false;
    if (i > 0 && !(alpha_bar[i] < alpha_bar[i - 1])) return false;
  }
  return true;
}

NoiseSchedule build_noise_schedule(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw ValidationError("noise schedule needs at least one step");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw ValidationError("noise schedule requires 0 < beta_start <= beta_end < 1");
  }
  NoiseSchedule s;
  s.beta.resize(static_cast<std::size_t>(steps));
  s.alpha.resize(s.beta.size());
  s.alpha_bar.resize(s.beta.size());
  double running = 1.0;
  for (int i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
    const auto k = static_cast<std::size_t>(i);
    s.beta[k] = beta_start + (beta_end - beta_start) * frac;
    s.alpha[k] = 1.0 - s.beta[k];
    running *= s.alpha[k];
    s.alpha_bar[k] = running;
  }
  return s;
}

nn::Matrix forward_diffuse(const nn::Matrix& x0, int t, const nn::Matrix& eps, const NoiseSchedule& schedule) {
  if (t < 1 || t > schedule.steps()) {
    throw ValidationError("diffusion step " + std::to_string(t) + " outside [1, " + std::to_string(schedule.steps()) + "]");
  }
  if (x0.rows() != eps.rows() || x0.cols() != eps.cols()) throw ValidationError("noise shape differs from latent shape");
  const double ab = schedule.alpha_bar_at(t);
  return static_cast<float>(std::sqrt(ab)) * x0 + static_cast<float>(std::sqrt(1.0 - ab)) * eps;
}

}  // namespace mitosyn::generator
