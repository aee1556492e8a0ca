#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mitosyn/core/kvconfig.hpp"

namespace mitosyn::metrics {

// Parallel probabilities and {0,1} labels.
struct ScoredSet {
  std::vector<double> probabilities;
  std::vector<int> labels;

  void validate() const;
  std::size_t positives() const;
  std::size_t negatives() const;
};

// Mann-Whitney form of the ROC area: ties count one half. Computed from
// mid-ranks in O(n log n) with integer arithmetic, so the result equals the
// pairwise count exactly. Throws ValidationError if a class is absent.
double auroc(const ScoredSet& set);

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  // nullopt when the corresponding class is absent.
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  double accuracy = 0.0;
};

// Positive iff probability >= threshold.
Confusion confusion_at(const ScoredSet& set, double threshold);

// Mean of two percentages. Throws if either is undefined.
double balanced_accuracy(std::optional<double> sensitivity_pct, std::optional<double> specificity_pct);

// All fields are percentages.
struct MetricsReport {
  double auroc = 0.0;
  double accuracy = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double balanced_accuracy = 0.0;
  double threshold = 0.5;

  KvConfig to_kv() const;
  static MetricsReport from_kv(const KvConfig& kv);
};

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"auroc", "accuracy", "sensitivity", "specificity", "balanced_accuracy"};
  return names;
}
double metric_value(const MetricsReport& report, const std::string& name);

// Full report at a threshold; requires both classes.
MetricsReport evaluate(const ScoredSet& set, double threshold);

enum class SdConvention { population, sample };

struct FoldSummary {
  std::vector<double> values;
  double mean = 0.0;
  double sd = 0.0;
  SdConvention convention = SdConvention::population;

  // Re-derives mean and sd from the values and compares to 1e-9.
  bool consistent() const;
  // `fold_1,...,fold_k,mean,sd` header line and value line.
  std::string to_csv() const;
  static FoldSummary from_csv(const std::string& text);
};

FoldSummary aggregate_folds(std::span<const double> values, SdConvention convention = SdConvention::population);

// Element-wise mean of m parallel probability lists.
std::vector<double> ensemble_average(const std::vector<std::vector<double>>& prob_lists);

// Highest AUROC; ties broken by balanced accuracy, then by the
// lexicographically smallest name.
std::string select_submission(const std::vector<std::pair<std::string, MetricsReport>>& candidates);

// Two decimals, half-up. Values within 1e-9 of a half step round up, which
// absorbs binary representation error in inputs like 88.655.
std::string format_fixed2(double value);
double round_half_up2(double value);
// "94.62 ± 0.78"
std::string format_mean_sd(const FoldSummary& summary);

}  // namespace mitosyn::metrics
