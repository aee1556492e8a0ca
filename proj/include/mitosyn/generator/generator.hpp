#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mitosyn/core/kvconfig.hpp"
#include "mitosyn/dataset/folds.hpp"
#include "mitosyn/dataset/manifest.hpp"
#include "mitosyn/generator/codec.hpp"
#include "mitosyn/generator/denoiser.hpp"
#include "mitosyn/generator/schedule.hpp"

namespace mitosyn::generator {

struct ScheduleConfig {
  int steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
};

// Optimization settings of one training stage. VAE and denoiser are trained
// one after the other, each with its own epoch budget.
struct StageSettings {
  int vae_epochs = 1000;
  int ddpm_epochs = 1000;
  int batch_size = 32;
  double lr = 1e-4;
  double weight_decay = 0.01;  // AdamW
};

struct GenStageConfig {
  StageSettings pretrain{1000, 1000, 32, 1e-4, 0.01};
  StageSettings finetune{2000, 5000, 8, 1e-4, 0.01};
  ScheduleConfig schedule;
  CodecConfig codec;
  DenoiserConfig denoiser;
  double kl_weight = 1e-6;

  // Full-size protocol: 16x16x4 latents, T = 1000.
  static GenStageConfig full();
  // CPU profile: T = 50, 8x8x4 latents, one small transformer block.
  static GenStageConfig tiny();

  void validate() const;
  KvConfig to_kv() const;
  static GenStageConfig from_kv(const KvConfig& kv);
  std::string fingerprint() const;
};

// Trained codec + denoiser + schedule, with provenance.
struct GeneratorCheckpoint {
  GenStageConfig config;
  LatentCodec codec;
  Denoiser denoiser;
  NoiseSchedule schedule;
  bool conditional = false;
  std::optional<int> fold;
  double latent_scale = 1.0;
  std::uint64_t seed = 0;
  // Every record id the checkpoint's weights were fit on, in order seen.
  std::vector<std::string> training_ids;
  std::vector<double> vae_losses;
  std::vector<double> ddpm_losses;

  void save(const std::filesystem::path& path) const;
  static GeneratorCheckpoint load(const std::filesystem::path& path);
  // Deep copy (weights are not shared).
  GeneratorCheckpoint clone() const;
};

std::vector<Image> load_images(const dataset::Manifest& manifest);

// Per-epoch mean VAE loss.
std::vector<double> train_codec(LatentCodec& codec, std::span<const Image> images, int epochs, int batch_size, double lr,
                                double weight_decay, double kl_weight, Rng& rng);

// Mean squared error of decode(encode-mean(x)) against x, in [-1, 1] pixel units.
double reconstruction_error(const LatentCodec& codec, std::span<const Image> images);

// Noise-prediction MSE for clean latents z0: draws t ~ U{1..T} and eps ~ N(0, I) per sample.
nn::Var ddpm_loss(const NoisePredictor& predictor, const nn::Matrix& z0, const std::vector<Condition>& conditions,
                  const NoiseSchedule& schedule, LatentShape shape, Rng& rng);

// One loss evaluation on an image batch: encode, scale, noise, predict.
// `labels` empty means unconditional.
nn::Var ddpm_training_step(const NoisePredictor& predictor, const LatentCodec& codec, std::span<const Image> batch,
                           std::span<const int> labels, const NoiseSchedule& schedule, double latent_scale, Rng& rng);

// Per-epoch mean denoiser loss over a stack of latent grids.
std::vector<double> train_denoiser(Denoiser& denoiser, const nn::Matrix& latents,
                                   const std::vector<Condition>& conditions, const NoiseSchedule& schedule, int epochs,
                                   int batch_size, double lr, double weight_decay, Rng& rng);

// Ancestral sampling from unit-Gaussian latents over all T steps.
nn::Matrix sample_latents(const NoisePredictor& predictor, const NoiseSchedule& schedule, LatentShape shape,
                          const std::vector<Condition>& conditions, Rng& rng);

GeneratorCheckpoint pretrain_generator(const dataset::Manifest& unlabeled, const GenStageConfig& config,
                                       std::uint64_t seed);

// One class-conditional checkpoint per fold, each fit only on the real
// records outside that fold.
std::vector<GeneratorCheckpoint> finetune_generator(const dataset::Manifest& labeled, const dataset::FoldPlan& plan,
                                                    const GeneratorCheckpoint& base, const GenStageConfig& config,
                                                    std::uint64_t seed);

std::vector<Image> sample_synthetic(const GeneratorCheckpoint& checkpoint, Condition cls, std::size_t count,
                                    std::uint64_t seed);

struct SynthPoolSpec {
  std::size_t atypical_total = 20000;
  std::size_t normal_total = 10191;
  int folds = 5;

  // Even split; the remainder goes one each to the lowest fold indices.
  std::vector<std::size_t> quota(std::size_t total) const;
};

// Samples every fold's quota from that fold's checkpoint, writes the PNGs
// under `out_dir/images/` and the pool manifest to `out_dir/manifest.csv`.
dataset::Manifest build_synth_pool(const std::vector<GeneratorCheckpoint>& checkpoints, const SynthPoolSpec& spec,
                                   std::uint64_t seed, const std::filesystem::path& out_dir);

}  // namespace mitosyn::generator
