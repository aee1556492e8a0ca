#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mitosyn/classifier/model.hpp"
#include "mitosyn/core/kvconfig.hpp"
#include "mitosyn/dataset/manifest.hpp"
#include "mitosyn/transforms/transforms.hpp"

namespace mitosyn::classifier {

struct TrainConfig {
  int batch_size = 16;
  int epochs = 25;
  double base_lr = 1e-4;
  // Cosine annealing restarts every `period` epochs, decaying to floor_lr.
  double period = 5.0;
  double floor_lr = 0.0;
  // Epochs without improvement before stopping; 0 disables early stopping.
  int patience = 0;

  // Family-dependent base learning rate (1e-4 conv, 1e-5 token).
  static TrainConfig for_family(Family family);
  void validate() const;
  KvConfig to_kv() const;
  static TrainConfig from_kv(const KvConfig& kv, Family family);
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double lr = 0.0;
  double val_auroc = 0.0;
};

std::string render_run_log(const std::vector<EpochLog>& log);
std::vector<EpochLog> parse_run_log(const std::string& text);

// Index into `log` of the maximum validation AUROC, earliest on ties.
std::size_t select_best_epoch(const std::vector<EpochLog>& log);

struct FoldCheckpoint {
  Classifier model;
  std::optional<int> fold;
  int selected_epoch = 0;
  double val_auroc = 0.0;
  std::string config_fingerprint;
  std::uint64_t seed = 0;
  std::vector<EpochLog> log;

  void save(const std::filesystem::path& path) const;
  static FoldCheckpoint load(const std::filesystem::path& path);
};

std::string training_fingerprint(const BackboneSpec& spec, const TrainConfig& config,
                                 const transforms::AugmentConfig& augment);

// Runs the epoch budget and keeps the weights with the best validation AUROC.
FoldCheckpoint train_fold(const dataset::Manifest& train, const dataset::Manifest& val, const BackboneSpec& spec,
                          const TrainConfig& config, const transforms::AugmentConfig& augment, std::uint64_t seed,
                          std::optional<int> fold = std::nullopt, PatchCache* cache = nullptr);

std::vector<double> predict_logits(const Classifier& model, std::span<const Image> patches);
std::vector<double> predict_proba(const Classifier& model, std::span<const Image> patches);
inline std::vector<double> predict_proba(const FoldCheckpoint& checkpoint, std::span<const Image> patches) {
  return predict_proba(checkpoint.model, patches);
}

}  // namespace mitosyn::classifier
