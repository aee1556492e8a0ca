#include "mitosyn/nn/layers.hpp"

#include <cmath>

#include "mitosyn/core/error.hpp"

namespace mitosyn::nn {

void append_params(NamedParams& out, const std::string& prefix, const NamedParams& inner) {
  for (const auto& [name, v] : inner) out.emplace_back(prefix + "." + name, v);
}

Matrix random_normal(Index rows, Index cols, float stddev, Rng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.normal()) * stddev;
  return m;
}

Linear::Linear(Index in, Index out, Rng& rng, float init_scale)
    : weight_(Var::parameter(random_normal(in, out, init_scale / std::sqrt(static_cast<float>(in)), rng))),
      bias_(Var::parameter(Matrix::Zero(1, out))) {}

LayerNorm::LayerNorm(Index dim)
    : gamma_(Var::parameter(Matrix::Ones(1, dim))), beta_(Var::parameter(Matrix::Zero(1, dim))) {}

TransformerBlock::TransformerBlock(Index dim, Index heads, Index mlp_ratio, Rng& rng)
    : dim_(dim),
      heads_(heads),
      norm1_(dim),
      norm2_(dim),
      qkv_(dim, 3 * dim, rng),
      proj_(dim, dim, rng, 0.5f),
      fc1_(dim, mlp_ratio * dim, rng),
      fc2_(mlp_ratio * dim, dim, rng, 0.5f) {
  if (heads <= 0 || dim % heads != 0) throw ValidationError("attention heads must divide the model width");
}

Var TransformerBlock::operator()(const Var& x, Index seq_len) const {
  if (seq_len <= 0 || x.rows() % seq_len != 0) throw ValidationError("transformer input is not a whole number of sequences");
  const Index batch = x.rows() / seq_len;
  const Index head_dim = dim_ / heads_;
  const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(head_dim));

  Var qkv = qkv_(norm1_(x));
  std::vector<Var> outputs;
  outputs.reserve(static_cast<std::size_t>(batch));
  for (Index b = 0; b < batch; ++b) {
    Var seq = slice_rows(qkv, b * seq_len, seq_len);
    std::vector<Var> heads;
    for (Index h = 0; h < heads_; ++h) {
      Var q = slice_cols(seq, h * head_dim, head_dim);
      Var k = slice_cols(seq, dim_ + h * head_dim, head_dim);
      Var v = slice_cols(seq, 2 * dim_ + h * head_dim, head_dim);
      Var attn = softmax_rows(scale(matmul(q, transpose(k)), inv_sqrt));
      heads.push_back(matmul(attn, v));
    }
    outputs.push_back(heads.size() == 1 ? heads.front() : concat_cols(heads));
  }
  Var attended = proj_(concat_rows(outputs));
  Var h = add(x, attended);
  return add(h, fc2_(gelu(fc1_(norm2_(h)))));
}

NamedParams TransformerBlock::parameters() const {
  NamedParams out;
  append_params(out, "norm1", norm1_.parameters());
  append_params(out, "qkv", qkv_.parameters());
  append_params(out, "proj", proj_.parameters());
  append_params(out, "norm2", norm2_.parameters());
  append_params(out, "fc1", fc1_.parameters());
  append_params(out, "fc2", fc2_.parameters());
  return out;
}

Matrix sinusoidal_embedding(const std::vector<int>& steps, Index dim) {
  Matrix out(static_cast<Index>(steps.size()), dim);
  const Index half = dim / 2;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    for (Index j = 0; j < dim; ++j) {
      const Index f = j % std::max<Index>(half, 1);
      const double freq = std::exp(-std::log(10000.0) * static_cast<double>(f) / static_cast<double>(std::max<Index>(half, 1)));
      const double arg = steps[i] * freq;
      out(static_cast<Index>(i), j) = static_cast<float>(j < half ? std::sin(arg) : std::cos(arg));
    }
  }
  return out;
}

}  // namespace mitosyn::nn
