#pragma once

#include <span>
#include <vector>

#include "mitosyn/core/random.hpp"
#include "mitosyn/image/image.hpp"
#include "mitosyn/nn/layers.hpp"

namespace mitosyn::generator {

// side x side cells, `channels` values per cell.
struct LatentShape {
  int side = 16;
  int channels = 4;

  int cells() const { return side * side; }
  int elements() const { return cells() * channels; }
  bool operator==(const LatentShape&) const = default;
};

// Grid layout: one row per cell, cells in raster order, images stacked
// vertically. Token layout: one row per q x q block of cells, entries ordered
// (dy, dx, channel). These two permutations are exact inverses.
nn::Matrix grid_to_tokens(const nn::Matrix& grid, int side, int q);
nn::Matrix tokens_to_grid(const nn::Matrix& tokens, int side, int q);
nn::Var grid_to_tokens(const nn::Var& grid, int side, int q);
nn::Var tokens_to_grid(const nn::Var& tokens, int side, int q);

// Images to a stacked grid with values mapped to [-1, 1], and back.
nn::Matrix images_to_grid(std::span<const Image> images);
std::vector<Image> grid_to_images(const nn::Matrix& grid, int side);

struct CodecConfig {
  int image_side = 128;
  LatentShape latent;
  int hidden = 64;

  int patch() const { return image_side / latent.side; }
  void validate() const;
};

// Variational autoencoder between 128x128x3 patches and a latent grid. Each
// latent cell summarizes one non-overlapping patch of the image (a strided
// convolution with kernel = stride = patch) through a two-layer MLP; the
// decoder mirrors it.
class LatentCodec {
 public:
  LatentCodec() = default;
  LatentCodec(const CodecConfig& config, Rng& rng);

  struct Encoded {
    nn::Var mu;      // (batch * cells) x channels
    nn::Var logvar;  // (batch * cells) x channels
  };

  // `pixels` is a stacked image grid in [-1, 1].
  Encoded encode(const nn::Matrix& pixels) const;
  // Returns a stacked image grid (unclamped).
  nn::Var decode(const nn::Var& latents) const;

  // Convenience wrappers without gradient tracking.
  nn::Matrix encode_mean(std::span<const Image> images) const;
  std::vector<Image> decode_images(const nn::Matrix& latents) const;

  const CodecConfig& config() const { return config_; }
  nn::NamedParams parameters() const;

 private:
  CodecConfig config_;
  nn::Linear enc1_, enc2_, dec1_, dec2_;
};

// Reconstruction MSE (mean over all pixel values) plus
// kl_weight * KL(N(mu, exp(logvar)) || N(0, I)), where the KL is summed over
// latent dimensions and averaged over the batch. Per dimension the KL is
// (mu^2 + exp(logvar) - logvar - 1) / 2.
struct VaeLossInput {
  std::span<const double> x;
  std::span<const double> recon;
  std::span<const double> mu;
  std::span<const double> logvar;
  double kl_weight = 1.0;
  std::size_t batch = 1;
};
double vae_loss(const VaeLossInput& in);

struct VaeLossGrad {
  std::vector<double> recon;
  std::vector<double> mu;
  std::vector<double> logvar;
};
VaeLossGrad vae_loss_grad(const VaeLossInput& in);

// Graph version used in training; gradients come from vae_loss_grad.
nn::Var vae_loss(const nn::Var& recon, const nn::Matrix& target, const nn::Var& mu, const nn::Var& logvar,
                 double kl_weight, std::size_t batch);

}  // namespace mitosyn::generator
