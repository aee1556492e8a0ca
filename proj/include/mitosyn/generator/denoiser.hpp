#pragma once

#include <functional>
#include <string_view>
#include <vector>

#include "mitosyn/core/random.hpp"
#include "mitosyn/generator/codec.hpp"
#include "mitosyn/nn/layers.hpp"

namespace mitosyn::generator {

enum class Condition : int { normal = 0, atypical = 1, unconditional = 2 };

std::string_view to_string(Condition c);
Condition condition_for_label(int label);

// Anything that maps (z_t, t, condition) to a noise prediction with the same
// grid layout as z_t. z_t stacks one latent grid per sample.
using NoisePredictor =
    std::function<nn::Var(const nn::Matrix& z_t, const std::vector<int>& steps, const std::vector<Condition>& conditions)>;

struct DenoiserConfig {
  LatentShape latent;
  int patch = 2;
  int width = 64;
  int depth = 2;
  int heads = 2;
  int mlp_ratio = 2;

  int tokens() const { return (latent.side / patch) * (latent.side / patch); }
  void validate() const;
};

// Transformer noise predictor over patchified latents. The conditioning
// vector is a time embedding plus a learned class embedding (rows: normal,
// atypical, unconditional); it is added to every token before the blocks and
// also shifts/scales the final normalization.
class Denoiser {
 public:
  Denoiser() = default;
  Denoiser(const DenoiserConfig& config, Rng& rng);

  nn::Var operator()(const nn::Matrix& z_t, const std::vector<int>& steps,
                     const std::vector<Condition>& conditions) const;

  NoisePredictor as_predictor() const;
  // Copies the unconditional class embedding into the normal/atypical rows.
  void init_class_rows_from_unconditional();
  const DenoiserConfig& config() const { return config_; }
  nn::NamedParams parameters() const;

 private:
  DenoiserConfig config_;
  nn::Linear embed_;
  nn::Var pos_;
  nn::Linear time1_, time2_;
  nn::Var class_table_;
  std::vector<nn::TransformerBlock> blocks_;
  nn::LayerNorm final_norm_;
  nn::Linear modulation_;
  nn::Linear out_;
};

}  // namespace mitosyn::generator
