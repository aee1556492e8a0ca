#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mitosyn/classifier/trainer.hpp"
#include "mitosyn/core/kvconfig.hpp"
#include "mitosyn/dataset/folds.hpp"
#include "mitosyn/dataset/mixing.hpp"
#include "mitosyn/metrics/metrics.hpp"
#include "mitosyn/transforms/transforms.hpp"

namespace mitosyn::orchestration {

// One experiment: regime x backbone x seed over a k-fold plan. Loaded from a
// flat key=value file with namespaces data, experiment, model, train,
// augment, mix and metrics.
struct ExperimentConfig {
  std::filesystem::path manifest;
  std::optional<std::filesystem::path> synth_pool;
  // Existing fold plan; when absent the plan is drawn from `seed`.
  std::optional<std::filesystem::path> plan;
  std::string name = "experiment";
  dataset::Regime regime = dataset::Regime::real_only;
  int k = 5;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs/experiment";
  classifier::BackboneSpec backbone;
  classifier::TrainConfig train;
  transforms::AugmentConfig augment;
  std::size_t synth_pos_per_fold = 7667;
  std::size_t synth_neg_per_fold = 0;
  double threshold = 0.5;
  metrics::SdConvention sd_convention = metrics::SdConvention::population;

  void validate() const;
  // Every field written explicitly.
  KvConfig to_kv() const;
  // Relative paths resolve against `base_dir`.
  static ExperimentConfig from_kv(const KvConfig& kv, const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);

  dataset::MixPolicy mix_policy() const;
};

// Records the seed used by the pipeline and pins compute to a single thread.
void set_determinism(std::uint64_t seed);
std::optional<std::uint64_t> determinism_seed();

struct RunArtifacts {
  std::filesystem::path dir;
  KvConfig snapshot;
  dataset::FoldPlan plan;
  std::vector<std::filesystem::path> checkpoints;
  std::vector<metrics::MetricsReport> reports;
  std::vector<std::vector<classifier::EpochLog>> logs;
  std::map<std::string, metrics::FoldSummary> summaries;
  bool complete = false;

  // Reads a finished run directory; throws if the run is incomplete.
  static RunArtifacts load(const std::filesystem::path& dir);
};

// File names inside a run directory.
namespace layout {
inline constexpr const char* kComplete = "COMPLETE";
inline constexpr const char* kIncomplete = "INCOMPLETE";
inline constexpr const char* kSnapshot = "config.snapshot";
inline constexpr const char* kInputCopy = "config.input";
inline constexpr const char* kPlan = "plan.csv";
inline constexpr const char* kRunInfo = "run.kv";
std::filesystem::path fold_dir(const std::filesystem::path& run, int fold);
std::filesystem::path summary_file(const std::filesystem::path& run, const std::string& metric);
}  // namespace layout

// Trains folds 0..k-1 in order and writes every artifact. On failure the
// directory keeps an INCOMPLETE marker carrying the error.
RunArtifacts run_cv_experiment(const ExperimentConfig& config, const std::string& input_text = {});

struct SummaryDelta {
  std::vector<double> per_fold;
  double mean_delta = 0.0;
};

// a - b, fold by fold.
SummaryDelta summary_delta(const metrics::FoldSummary& a, const metrics::FoldSummary& b);

struct RegimeComparison {
  std::string backbone;
  std::string label_a, label_b;
  std::map<std::string, metrics::FoldSummary> a, b;
  std::map<std::string, SummaryDelta> deltas;

  std::string render() const;
};

// Requires the same backbone family, k and fold plan.
RegimeComparison compare_regimes(const RunArtifacts& a, const RunArtifacts& b);

}  // namespace mitosyn::orchestration
