#include "mitosyn/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "mitosyn/core/error.hpp"
#include "mitosyn/core/io.hpp"

namespace mitosyn::metrics {

void ScoredSet::validate() const {
  if (probabilities.size() != labels.size()) throw ValidationError("probabilities and labels differ in length");
  for (int l : labels) {
    if (l != 0 && l != 1) throw ValidationError("labels must be 0 or 1");
  }
  for (double p : probabilities) {
    if (!std::isfinite(p)) throw ValidationError("non-finite score");
  }
}

std::size_t ScoredSet::positives() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

std::size_t ScoredSet::negatives() const { return labels.size() - positives(); }

double auroc(const ScoredSet& set) {
  set.validate();
  const std::size_t n = set.labels.size();
  const std::uint64_t n_pos = set.positives();
  const std::uint64_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw ValidationError("AUROC undefined: both classes are required");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return set.probabilities[a] < set.probabilities[b]; });

  // Twice the rank sum of positives; a tie block [i, j) has mid-rank (i+1+j)/2.
  std::uint64_t doubled_rank_sum = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && set.probabilities[order[j]] == set.probabilities[order[i]]) ++j;
    std::uint64_t pos_in_block = 0;
    for (std::size_t q = i; q < j; ++q) pos_in_block += static_cast<std::uint64_t>(set.labels[order[q]]);
    doubled_rank_sum += pos_in_block * (i + 1 + j);
    i = j;
  }
  const std::uint64_t doubled_u = doubled_rank_sum - n_pos * (n_pos + 1);
  return static_cast<double>(doubled_u) / static_cast<double>(2 * n_pos * n_neg);
}

Confusion confusion_at(const ScoredSet& set, double threshold) {
  set.validate();
  if (set.labels.empty()) throw ValidationError("confusion of an empty set");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ValidationError("threshold must be in [0, 1]");
  Confusion c;
  for (std::size_t i = 0; i < set.labels.size(); ++i) {
    const bool predicted = set.probabilities[i] >= threshold;
    if (set.labels[i] == 1) {
      predicted ? ++c.tp : ++c.fn;
    } else {
      predicted ? ++c.fp : ++c.tn;
    }
  }
  if (c.tp + c.fn > 0) c.sensitivity = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (c.tn + c.fp > 0) c.specificity = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  c.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(set.labels.size());
  return c;
}

double balanced_accuracy(std::optional<double> sensitivity_pct, std::optional<double> specificity_pct) {
  if (!sensitivity_pct || !specificity_pct) throw ValidationError("balanced accuracy needs both rates defined");
  return (*sensitivity_pct + *specificity_pct) / 2.0;
}

KvConfig MetricsReport::to_kv() const {
  KvConfig kv;
  kv.set("auroc", auroc);
  kv.set("accuracy", accuracy);
  kv.set("sensitivity", sensitivity);
  kv.set("specificity", specificity);
  kv.set("balanced_accuracy", balanced_accuracy);
  kv.set("threshold", threshold);
  return kv;
}

MetricsReport MetricsReport::from_kv(const KvConfig& kv) {
  MetricsReport r;
  r.auroc = kv.get_double("auroc");
  r.accuracy = kv.get_double("accuracy");
  r.sensitivity = kv.get_double("sensitivity");
  r.specificity = kv.get_double("specificity");
  r.balanced_accuracy = kv.get_double("balanced_accuracy");
  r.threshold = kv.get_double("threshold");
  return r;
}

double metric_value(const MetricsReport& report, const std::string& name) {
  if (name == "auroc") return report.auroc;
  if (name == "accuracy") return report.accuracy;
  if (name == "sensitivity") return report.sensitivity;
  if (name == "specificity") return report.specificity;
  if (name == "balanced_accuracy") return report.balanced_accuracy;
  throw ValidationError("unknown metric '" + name + "'");
}

MetricsReport evaluate(const ScoredSet& set, double threshold) {
  const Confusion c = confusion_at(set, threshold);
  MetricsReport r;
  r.threshold = threshold;
  r.auroc = 100.0 * auroc(set);
  r.accuracy = 100.0 * c.accuracy;
  r.sensitivity = 100.0 * c.sensitivity.value();
  r.specificity = 100.0 * c.specificity.value();
  r.balanced_accuracy = balanced_accuracy(r.sensitivity, r.specificity);
  return r;
}

FoldSummary aggregate_folds(std::span<const double> values, SdConvention convention) {
  if (values.empty()) throw ValidationError("aggregate_folds needs at least one value");
  if (convention == SdConvention::sample && values.size() < 2) {
    throw ValidationError("sample standard deviation needs at least two values");
  }
  FoldSummary s;
  s.values.assign(values.begin(), values.end());
  s.convention = convention;
  const double k = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / k;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / (convention == SdConvention::population ? k : k - 1.0));
  return s;
}

bool FoldSummary::consistent() const {
  if (values.empty()) return false;
  const FoldSummary fresh = aggregate_folds(values, convention);
  return std::abs(fresh.mean - mean) <= 1e-9 && std::abs(fresh.sd - sd) <= 1e-9;
}

std::string FoldSummary::to_csv() const {
  std::string header, row;
  for (std::size_t i = 0; i < values.size(); ++i) {
    header += "fold_" + std::to_string(i + 1) + ",";
    row += format_double(values[i]) + ",";
  }
  header += "mean,sd\n";
  row += format_double(mean) + "," + format_double(sd) + "\n";
  return header + row;
}

FoldSummary FoldSummary::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  const auto names = split_csv_line(header);
  const auto fields = split_csv_line(row);
  if (names.size() < 3 || names.size() != fields.size() || names[names.size() - 2] != "mean" ||
      names.back() != "sd") {
    throw ValidationError("malformed fold summary");
  }
  FoldSummary s;
  for (std::size_t i = 0; i + 2 < fields.size(); ++i) s.values.push_back(std::stod(fields[i]));
  s.mean = std::stod(fields[fields.size() - 2]);
  s.sd = std::stod(fields.back());
  return s;
}

std::vector<double> ensemble_average(const std::vector<std::vector<double>>& prob_lists) {
  if (prob_lists.empty()) throw ValidationError("ensemble needs at least one member");
  const std::size_t n = prob_lists.front().size();
  for (const auto& l : prob_lists) {
    if (l.size() != n) throw ValidationError("ensemble members differ in length");
  }
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    // A list that is identical across members must come back unchanged.
    bool same = true;
    for (const auto& l : prob_lists) same = same && l[i] == prob_lists.front()[i];
    if (same) {
      out[i] = prob_lists.front()[i];
      continue;
    }
    double acc = 0.0;
    for (const auto& l : prob_lists) acc += l[i];
    out[i] = std::clamp(acc / static_cast<double>(prob_lists.size()), 0.0, 1.0);
  }
  return out;
}

std::string select_submission(const std::vector<std::pair<std::string, MetricsReport>>& candidates) {
  if (candidates.empty()) throw ValidationError("no submission candidates");
  const auto* best = &candidates.front();
  for (const auto& c : candidates) {
    const auto& [name, r] = c;
    const auto& [best_name, b] = *best;
    if (r.auroc > b.auroc || (r.auroc == b.auroc && r.balanced_accuracy > b.balanced_accuracy) ||
        (r.auroc == b.auroc && r.balanced_accuracy == b.balanced_accuracy && name < best_name)) {
      best = &c;
    }
  }
  return best->first;
}

double round_half_up2(double value) {
  const double scaled = value * 100.0;
  return std::floor(scaled + 0.5 + 1e-9 * std::max(1.0, std::abs(scaled))) / 100.0;
}

std::string format_fixed2(double value) {
  char buf[64];
  double r = round_half_up2(value);
  if (r == 0.0) r = 0.0;  // no "-0.00"
  std::snprintf(buf, sizeof(buf), "%.2f", r);
  return buf;
}

std::string format_mean_sd(const FoldSummary& summary) {
  return format_fixed2(summary.mean) + " \xC2\xB1 " + format_fixed2(summary.sd);
}

}  // namespace mitosyn::metrics
