#include "mitosyn/generator/codec.hpp"

#include <algorithm>
#include <cmath>

#include "mitosyn/core/error.hpp"

namespace mitosyn::generator {
namespace {

// source[i] for the grid -> token permutation.
std::vector<nn::Index> grid_to_token_source(nn::Index total, int side, int q, nn::Index channels) {
  if (side % q != 0) throw ValidationError("grid side must be divisible by the patch size");
  const nn::Index per_image = static_cast<nn::Index>(side) * side * channels;
  if (total % per_image != 0) throw ValidationError("grid size is not a whole number of images");
  const nn::Index batch = total / per_image;
  const int g = side / q;
  std::vector<nn::Index> source(static_cast<std::size_t>(total));
  std::size_t i = 0;
  for (nn::Index b = 0; b < batch; ++b)
    for (int ty = 0; ty < g; ++ty)
      for (int tx = 0; tx < g; ++tx)
        for (int dy = 0; dy < q; ++dy)
          for (int dx = 0; dx < q; ++dx)
            for (nn::Index c = 0; c < channels; ++c) {
              const nn::Index y = ty * q + dy, x = tx * q + dx;
              source[i++] = ((b * side + y) * side + x) * channels + c;
            }
  return source;
}

std::vector<nn::Index> invert(const std::vector<nn::Index>& perm) {
  std::vector<nn::Index> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[static_cast<std::size_t>(perm[i])] = static_cast<nn::Index>(i);
  return inv;
}

void check_vae_input(const VaeLossInput& in) {
  if (in.x.size() != in.recon.size()) throw ValidationError("vae_loss: image and reconstruction sizes differ");
  if (in.mu.size() != in.logvar.size()) throw ValidationError("vae_loss: mu and logvar sizes differ");
  if (in.x.empty() || in.mu.empty() || in.batch == 0) throw ValidationError("vae_loss: empty input");
  auto finite = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double d) { return std::isfinite(d); });
  };
  if (!finite(in.x) || !finite(in.recon) || !finite(in.mu) || !finite(in.logvar) || !std::isfinite(in.kl_weight)) {
    throw ValidationError("vae_loss: non-finite input");
  }
}

}  // namespace

nn::Matrix grid_to_tokens(const nn::Matrix& grid, int side, int q) {
  const auto source = grid_to_token_source(grid.size(), side, q, grid.cols());
  nn::Matrix out(grid.size() / (static_cast<nn::Index>(q) * q * grid.cols()), static_cast<nn::Index>(q) * q * grid.cols());
  for (std::size_t i = 0; i < source.size(); ++i) out.data()[i] = grid.data()[source[i]];
  return out;
}

nn::Matrix tokens_to_grid(const nn::Matrix& tokens, int side, int q) {
  const nn::Index channels = tokens.cols() / (static_cast<nn::Index>(q) * q);
  const auto source = invert(grid_to_token_source(tokens.size(), side, q, channels));
  nn::Matrix out(tokens.size() / channels, channels);
  for (std::size_t i = 0; i < source.size(); ++i) out.data()[i] = tokens.data()[source[i]];
  return out;
}

nn::Var grid_to_tokens(const nn::Var& grid, int side, int q) {
  const auto source = grid_to_token_source(grid.value().size(), side, q, grid.cols());
  const nn::Index cols = static_cast<nn::Index>(q) * q * grid.cols();
  return nn::permute(grid, source, grid.value().size() / cols, cols);
}

nn::Var tokens_to_grid(const nn::Var& tokens, int side, int q) {
  const nn::Index channels = tokens.cols() / (static_cast<nn::Index>(q) * q);
  const auto source = invert(grid_to_token_source(tokens.value().size(), side, q, channels));
  return nn::permute(tokens, source, tokens.value().size() / channels, channels);
}

nn::Matrix images_to_grid(std::span<const Image> images) {
  if (images.empty()) throw ValidationError("no images");
  const int w = images.front().width, h = images.front().height;
  if (w != h) throw ValidationError("images must be square");
  nn::Matrix grid(static_cast<nn::Index>(images.size()) * w * h, 3);
  float* dst = grid.data();
  for (const auto& img : images) {
    if (img.width != w || img.height != h) throw ValidationError("images in a batch must share a size");
    for (std::uint8_t p : img.pixels) *dst++ = p / 127.5f - 1.0f;
  }
  return grid;
}

std::vector<Image> grid_to_images(const nn::Matrix& grid, int side) {
  const nn::Index per_image = static_cast<nn::Index>(side) * side;
  if (grid.cols() != 3 || grid.rows() % per_image != 0) throw ValidationError("grid is not a stack of RGB images");
  std::vector<Image> out;
  const float* src = grid.data();
  for (nn::Index b = 0; b < grid.rows() / per_image; ++b) {
    Image img(side, side);
    for (auto& p : img.pixels) {
      const float v = (*src++ + 1.0f) * 127.5f;
      p = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
    out.push_back(std::move(img));
  }
  return out;
}

void CodecConfig::validate() const {
  if (latent.side <= 0 || latent.channels <= 0 || hidden <= 0) throw ValidationError("codec sizes must be positive");
  if (image_side % latent.side != 0) throw ValidationError("latent side must divide the image side");
}

LatentCodec::LatentCodec(const CodecConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const nn::Index patch_values = static_cast<nn::Index>(config_.patch()) * config_.patch() * 3;
  enc1_ = nn::Linear(patch_values, config_.hidden, rng);
  enc2_ = nn::Linear(config_.hidden, 2 * config_.latent.channels, rng, 0.5f);
  dec1_ = nn::Linear(config_.latent.channels, config_.hidden, rng);
  dec2_ = nn::Linear(config_.hidden, patch_values, rng, 0.5f);
}

LatentCodec::Encoded LatentCodec::encode(const nn::Matrix& pixels) const {
  const nn::Matrix patches = grid_to_tokens(pixels, config_.image_side, config_.patch());
  nn::Var h = enc2_(nn::silu(enc1_(nn::Var(patches))));
  const nn::Index c = config_.latent.channels;
  return {nn::slice_cols(h, 0, c), nn::slice_cols(h, c, c)};
}

nn::Var LatentCodec::decode(const nn::Var& latents) const {
  nn::Var patches = dec2_(nn::silu(dec1_(latents)));
  return tokens_to_grid(patches, config_.image_side, config_.patch());
}

nn::Matrix LatentCodec::encode_mean(std::span<const Image> images) const {
  return encode(images_to_grid(images)).mu.value();
}

std::vector<Image> LatentCodec::decode_images(const nn::Matrix& latents) const {
  return grid_to_images(decode(nn::Var(latents)).value(), config_.image_side);
}

nn::NamedParams LatentCodec::parameters() const {
  nn::NamedParams out;
  nn::append_params(out, "enc1", enc1_.parameters());
  nn::append_params(out, "enc2", enc2_.parameters());
  nn::append_params(out, "dec1", dec1_.parameters());
  nn::append_params(out, "dec2", dec2_.parameters());
  return out;
}

double vae_loss(const VaeLossInput& in) {
  check_vae_input(in);
  double se = 0.0;
  for (std::size_t i = 0; i < in.x.size(); ++i) se += (in.recon[i] - in.x[i]) * (in.recon[i] - in.x[i]);
  double kl = 0.0;
  for (std::size_t i = 0; i < in.mu.size(); ++i) {
    kl += 0.5 * (in.mu[i] * in.mu[i] + std::exp(in.logvar[i]) - in.logvar[i] - 1.0);
  }
  return se / static_cast<double>(in.x.size()) + in.kl_weight * kl / static_cast<double>(in.batch);
}

VaeLossGrad vae_loss_grad(const VaeLossInput& in) {
  check_vae_input(in);
  VaeLossGrad g;
  const double n = static_cast<double>(in.x.size());
  const double b = static_cast<double>(in.batch);
  g.recon.resize(in.x.size());
  for (std::size_t i = 0; i < in.x.size(); ++i) g.recon[i] = 2.0 * (in.recon[i] - in.x[i]) / n;
  g.mu.resize(in.mu.size());
  g.logvar.resize(in.mu.size());
  for (std::size_t i = 0; i < in.mu.size(); ++i) {
    g.mu[i] = in.kl_weight * in.mu[i] / b;
    g.logvar[i] = in.kl_weight * 0.5 * (std::exp(in.logvar[i]) - 1.0) / b;
  }
  return g;
}

nn::Var vae_loss(const nn::Var& recon, const nn::Matrix& target, const nn::Var& mu, const nn::Var& logvar,
                 double kl_weight, std::size_t batch) {
  if (recon.rows() != target.rows() || recon.cols() != target.cols()) {
    throw ValidationError("vae_loss: reconstruction shape differs from the input");
  }
  auto to_double = [](const nn::Matrix& m) {
    return std::vector<double>(m.data(), m.data() + m.size());
  };
  const auto x = to_double(target), r = to_double(recon.value()), m = to_double(mu.value()),
             lv = to_double(logvar.value());
  const VaeLossInput in{x, r, m, lv, kl_weight, batch};
  nn::Matrix out(1, 1);
  out(0, 0) = static_cast<float>(vae_loss(in));
  auto grad = std::make_shared<VaeLossGrad>(vae_loss_grad(in));
  auto as_matrix = [](const std::vector<double>& v, nn::Index rows, nn::Index cols) {
    nn::Matrix mat(rows, cols);
    for (std::size_t i = 0; i < v.size(); ++i) mat.data()[i] = static_cast<float>(v[i]);
    return mat;
  };
  return nn::Var::from_op(std::move(out), {recon, mu, logvar}, [grad, as_matrix](nn::Node& self) {
    const float s = self.grad(0, 0);
    const std::vector<double>* parts[3] = {&grad->recon, &grad->mu, &grad->logvar};
    for (std::size_t i = 0; i < 3; ++i) {
      nn::Node& p = *self.parents[i];
      if (p.requires_grad) p.accumulate(as_matrix(*parts[i], p.value.rows(), p.value.cols()) * s);
    }
  });
}

}  // namespace mitosyn::generator
