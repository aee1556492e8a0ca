#include <gtest/gtest.h>

#include <cmath>

#include "mitosyn/core/error.hpp"
#include "mitosyn/core/random.hpp"
#include "mitosyn/metrics/metrics.hpp"

using namespace mitosyn;
using namespace mitosyn::metrics;

namespace {

// Pairwise count: P(score_pos > score_neg) + 0.5 P(tie).
double auroc_pairs(const ScoredSet& s) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    if (s.labels[i] != 1) continue;
    for (std::size_t j = 0; j < s.labels.size(); ++j) {
      if (s.labels[j] != 0) continue;
      ++pairs;
      if (s.probabilities[i] > s.probabilities[j]) wins += 1.0;
      if (s.probabilities[i] == s.probabilities[j]) wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

ScoredSet random_set(Rng& rng, std::size_t n, int levels) {
  ScoredSet s;
  for (std::size_t i = 0; i < n; ++i) {
    s.labels.push_back(i < 2 ? static_cast<int>(i) : static_cast<int>(rng.below(2)));
    s.probabilities.push_back(levels > 0 ? static_cast<double>(rng.below(levels)) / levels : rng.uniform());
  }
  return s;
}

}  // namespace

TEST(Auroc, SmallExample) {
  EXPECT_DOUBLE_EQ(auroc({{0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}}), 0.75);
  EXPECT_DOUBLE_EQ(auroc({{0.5, 0.5}, {0, 1}}), 0.5);
  EXPECT_DOUBLE_EQ(auroc({{0.9, 0.1}, {0, 1}}), 0.0);
}

TEST(Auroc, MatchesPairwiseCount) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto set = random_set(rng, 2 + rng.below(60), trial % 2 ? 5 : 0);
    ASSERT_DOUBLE_EQ(auroc(set), auroc_pairs(set));
  }
}

TEST(Auroc, InvariantToNegativeDuplicationAndMonotoneMaps) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    auto set = random_set(rng, 4 + rng.below(40), 7);
    const double base = auroc(set);
    auto dup = set;
    for (std::size_t i = 0; i < set.labels.size(); ++i) {
      if (set.labels[i] == 0) {
        dup.labels.push_back(0);
        dup.probabilities.push_back(set.probabilities[i]);
      }
    }
    EXPECT_DOUBLE_EQ(auroc(dup), base);
    auto squashed = set;
    for (double& p : squashed.probabilities) p = p * p;
    EXPECT_DOUBLE_EQ(auroc(squashed), base);
  }
}

TEST(Auroc, SingleClassAndBadInput) {
  EXPECT_THROW(auroc({{0.2, 0.3}, {1, 1}}), ValidationError);
  EXPECT_THROW(auroc({{0.2}, {1, 0}}), ValidationError);
  EXPECT_THROW(auroc({{0.2, 0.3}, {2, 0}}), ValidationError);
  EXPECT_THROW(auroc({{NAN, 0.3}, {1, 0}}), ValidationError);
}

TEST(Confusion, ThresholdIsInclusive) {
  const ScoredSet s{{0.5, 0.49, 0.7, 0.2}, {1, 1, 0, 0}};
  const auto c = confusion_at(s, 0.5);
  EXPECT_EQ(c.tp, 1u);
  EXPECT_EQ(c.fn, 1u);
  EXPECT_EQ(c.fp, 1u);
  EXPECT_EQ(c.tn, 1u);
  EXPECT_DOUBLE_EQ(*c.sensitivity, 0.5);
  EXPECT_DOUBLE_EQ(*c.specificity, 0.5);
  EXPECT_DOUBLE_EQ(c.accuracy, 0.5);
  EXPECT_FALSE(confusion_at({{0.1}, {0}}, 0.5).sensitivity.has_value());
  EXPECT_THROW(confusion_at(s, 1.5), ValidationError);
}

TEST(Confusion, BalancedAccuracy) {
  EXPECT_DOUBLE_EQ(balanced_accuracy(80.0, 90.0), 85.0);
  EXPECT_THROW(balanced_accuracy(std::nullopt, 90.0), ValidationError);
  const auto r = evaluate({{0.9, 0.8, 0.4, 0.6, 0.1}, {1, 1, 1, 0, 0}}, 0.5);
  EXPECT_NEAR(r.sensitivity, 200.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.specificity, 50.0);
  EXPECT_NEAR(r.balanced_accuracy, (200.0 / 3.0 + 50.0) / 2.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.accuracy, 60.0);
  EXPECT_NEAR(r.auroc, 100.0 * 5.0 / 6.0, 1e-12);
  const auto back = MetricsReport::from_kv(r.to_kv());
  EXPECT_EQ(back.balanced_accuracy, r.balanced_accuracy);
  EXPECT_THROW(metric_value(r, "f1"), ValidationError);
}

TEST(Aggregate, FiveFoldReferenceRows) {
  struct Row {
    std::vector<double> folds;
    const char* text;
  };
  const std::vector<Row> rows = {{{93.84, 94.74, 93.63, 95.68, 95.21}, "94.62 ± 0.78"},
                                 {{93.55, 94.40, 93.74, 95.22, 94.96}, "94.37 ± 0.65"},
                                 {{94.22, 94.97, 94.13, 95.25, 95.31}, "94.78 ± 0.50"},
                                 {{93.83, 94.49, 93.96, 95.08, 94.78}, "94.43 ± 0.48"}};
  for (const auto& row : rows) {
    const auto s = aggregate_folds(row.folds);
    double mean = 0.0;
    for (double v : row.folds) mean += v / 5.0;
    double var = 0.0;
    for (double v : row.folds) var += (v - mean) * (v - mean) / 5.0;
    EXPECT_NEAR(s.mean, mean, 1e-12);
    EXPECT_NEAR(s.sd, std::sqrt(var), 1e-12);
    EXPECT_EQ(format_mean_sd(s), row.text);
  }
}

TEST(Aggregate, SampleConvention) {
  const std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
  EXPECT_NEAR(aggregate_folds(v, SdConvention::sample).sd, std::sqrt(5.0 / 3.0), 1e-12);
  EXPECT_NEAR(aggregate_folds(v).sd, std::sqrt(1.25), 1e-12);
  EXPECT_THROW(aggregate_folds(std::vector<double>{1.0}, SdConvention::sample), ValidationError);
  EXPECT_THROW(aggregate_folds(std::vector<double>{}), ValidationError);
}

TEST(Aggregate, ReDerivationProperty) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(2 + rng.below(8));
    for (double& x : v) x = rng.uniform(50.0, 100.0);
    const auto s = aggregate_folds(v);
    EXPECT_TRUE(s.consistent());
    EXPECT_GE(s.mean, *std::min_element(v.begin(), v.end()) - 1e-12);
    EXPECT_LE(s.mean, *std::max_element(v.begin(), v.end()) + 1e-12);
    EXPECT_LE(s.sd, aggregate_folds(v, SdConvention::sample).sd + 1e-12);
    auto shifted = v;
    for (double& x : shifted) x += 3.0;
    EXPECT_NEAR(aggregate_folds(shifted).sd, s.sd, 1e-9);
    const auto back = FoldSummary::from_csv(s.to_csv());
    EXPECT_EQ(back.values, s.values);
    EXPECT_TRUE(back.consistent());
    auto tampered = s;
    tampered.mean += 1e-6;
    EXPECT_FALSE(tampered.consistent());
  }
}

TEST(Format, HalfUp) {
  EXPECT_EQ(format_fixed2(88.655), "88.66");
  EXPECT_EQ(format_fixed2(86.215), "86.22");
  EXPECT_EQ(format_fixed2(94.6199), "94.62");
  EXPECT_EQ(format_fixed2(0.125), "0.13");
  EXPECT_EQ(format_fixed2(0.0), "0.00");
  EXPECT_EQ(format_fixed2(100.0), "100.00");
  EXPECT_DOUBLE_EQ(round_half_up2(1.005), 1.01);
}

TEST(Ensemble, MeanAndSelection) {
  const auto avg = ensemble_average({{0.2, 0.8}, {0.4, 0.6}, {0.6, 0.1}});
  EXPECT_NEAR(avg[0], 0.4, 1e-15);
  EXPECT_NEAR(avg[1], 0.5, 1e-15);
  EXPECT_THROW(ensemble_average({{0.1}, {0.1, 0.2}}), ValidationError);
  EXPECT_THROW(ensemble_average({}), ValidationError);

  MetricsReport a, b, c;
  a.auroc = 95.0, a.balanced_accuracy = 80.0;
  b.auroc = 95.0, b.balanced_accuracy = 85.0;
  c.auroc = 94.0, c.balanced_accuracy = 99.0;
  EXPECT_EQ(select_submission({{"a", a}, {"b", b}, {"c", c}}), "b");
  EXPECT_EQ(select_submission({{"z", a}, {"y", a}}), "y");
  EXPECT_THROW(select_submission({}), ValidationError);
}
