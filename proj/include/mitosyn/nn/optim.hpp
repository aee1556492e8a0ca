#pragma once

#include <cstdint>
#include <vector>

#include "mitosyn/nn/layers.hpp"

namespace mitosyn::nn {

class Optimizer {
 public:
  explicit Optimizer(const NamedParams& params);
  virtual ~Optimizer() = default;

  // Applies one update with the given learning rate, using accumulated grads.
  virtual void step(double lr) = 0;
  void zero_grad();

 protected:
  std::vector<Var> params_;
  std::vector<Matrix> m_, v_;
  std::int64_t t_ = 0;
};

// Adam with decoupled weight decay.
class AdamW final : public Optimizer {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
  };
  AdamW(const NamedParams& params, Options options);
  explicit AdamW(const NamedParams& params) : AdamW(params, Options{}) {}
  void step(double lr) override;

 private:
  Options opt_;
};

// Nesterov-accelerated Adam with the momentum-decay schedule
// mu_t = beta1 * (1 - 0.5 * 0.96^(t * momentum_decay)).
class NAdam final : public Optimizer {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double momentum_decay = 4e-3;
    double weight_decay = 0.0;
  };
  NAdam(const NamedParams& params, Options options);
  explicit NAdam(const NamedParams& params) : NAdam(params, Options{}) {}
  void step(double lr) override;

 private:
  Options opt_;
  double mu_product_ = 1.0;
};

}  // namespace mitosyn::nn
