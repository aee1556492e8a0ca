#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mitosyn/core/random.hpp"
#include "mitosyn/nn/tensor.hpp"

namespace mitosyn::nn {

using NamedParams = std::vector<std::pair<std::string, Var>>;

void append_params(NamedParams& out, const std::string& prefix, const NamedParams& inner);

// Gaussian init with the given standard deviation.
Matrix random_normal(Index rows, Index cols, float stddev, Rng& rng);

class Linear {
 public:
  Linear() = default;
  Linear(Index in, Index out, Rng& rng, float init_scale = 1.0f);

  Var operator()(const Var& x) const { return add_row(matmul(x, weight_), bias_); }
  NamedParams parameters() const { return {{"weight", weight_}, {"bias", bias_}}; }
  Index in_features() const { return weight_.rows(); }
  Index out_features() const { return weight_.cols(); }

 private:
  Var weight_;
  Var bias_;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  explicit LayerNorm(Index dim);

  Var operator()(const Var& x) const { return add_row(mul_row(layer_norm(x), gamma_), beta_); }
  NamedParams parameters() const { return {{"gamma", gamma_}, {"beta", beta_}}; }

 private:
  Var gamma_;
  Var beta_;
};

// Pre-norm transformer block: x + Attn(LN(x)), then x + MLP(LN(x)). The
// input stacks `batch` sequences of equal length; attention stays within a sequence.
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(Index dim, Index heads, Index mlp_ratio, Rng& rng);

  Var operator()(const Var& x, Index seq_len) const;
  NamedParams parameters() const;

 private:
  Index dim_ = 0;
  Index heads_ = 1;
  LayerNorm norm1_, norm2_;
  Linear qkv_, proj_, fc1_, fc2_;
};

// Sinusoidal embedding of integer steps, one row per step.
Matrix sinusoidal_embedding(const std::vector<int>& steps, Index dim);

}  // namespace mitosyn::nn
