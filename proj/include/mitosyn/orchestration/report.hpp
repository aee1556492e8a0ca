#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mitosyn/classifier/trainer.hpp"
#include "mitosyn/dataset/manifest.hpp"
#include "mitosyn/metrics/metrics.hpp"

namespace mitosyn::orchestration {

// Fixed-width table: label, F1..Fk, "Mean ± SD"; two decimals.
std::string render_report(const std::vector<std::pair<std::string, metrics::FoldSummary>>& rows);

struct PredictionRow {
  std::string id;
  double probability = 0.0;
  int label = 0;
};

// `id,probability,label` with probabilities at six decimals.
std::string render_predictions(const std::vector<PredictionRow>& rows);

struct PackageResult {
  std::vector<PredictionRow> rows;
  // (id, message) for images that could not be scored.
  std::vector<std::pair<std::string, std::string>> errors;
  std::string mode;  // "single" or "ensemble"
};

// Scores every PNG in `input_dir` with each checkpoint, averages the
// probabilities and thresholds (label 1 iff p >= threshold). Rows are sorted
// by id (the file stem).
PackageResult package_submission(const std::vector<classifier::FoldCheckpoint>& checkpoints,
                                 const std::filesystem::path& input_dir, double threshold);

// Writes the predictions file and, when there are errors, `<path>.errors.csv`.
void write_package(const std::filesystem::path& path, const PackageResult& result);

struct EvaluationResult {
  metrics::MetricsReport report;
  std::string mode;
  std::string tag;
  std::string note;

  KvConfig to_kv() const;
};

// Scores a labeled manifest with the (ensembled) checkpoints. A `preliminary`
// tag attaches a note that the numbers do not predict final performance.
EvaluationResult evaluate_checkpoints(const std::vector<classifier::FoldCheckpoint>& checkpoints,
                                      const dataset::Manifest& labeled, double threshold, const std::string& tag);

}  // namespace mitosyn::orchestration
