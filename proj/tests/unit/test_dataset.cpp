#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "mitosyn/core/error.hpp"
#include "mitosyn/core/io.hpp"
#include "mitosyn/dataset/folds.hpp"
#include "mitosyn/dataset/mixing.hpp"
#include "support.hpp"

using namespace mitosyn;
using namespace mitosyn::dataset;

namespace {

constexpr const char* kHeader = "id,path,label,domain,provenance,origin_fold\n";

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    return e.what();
  }
  return {};
}

// Per-fold (negatives, positives) counts.
std::vector<std::pair<int, int>> per_fold_counts(const Manifest& m, const FoldPlan& plan) {
  std::vector<std::pair<int, int>> counts(static_cast<std::size_t>(plan.k()));
  for (const auto& r : m.records()) {
    auto& c = counts[static_cast<std::size_t>(plan.fold_of(r.id))];
    (r.label == kAtypical ? c.second : c.first)++;
  }
  return counts;
}

}  // namespace

TEST(Manifest, EmptyFileHasNoRecords) {
  EXPECT_NE(error_of([] { parse_manifest(kHeader); }).find("no records"), std::string::npos);
  EXPECT_NE(error_of([] { parse_manifest(""); }).find("no records"), std::string::npos);
}

TEST(Manifest, TwoValidRows) {
  const auto m = parse_manifest(std::string(kHeader) + "a,a.png,normal,d1,real,\nb,b.png,atypical,d2,real,\n");
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.count_label(kNormal), 1u);
  EXPECT_EQ(m.count_label(kAtypical), 1u);
  EXPECT_TRUE(m.counts_consistent());
  EXPECT_EQ(m.records()[1].id, "b");
}

TEST(Manifest, RejectsBadRows) {
  const std::string h = kHeader;
  EXPECT_THROW(parse_manifest(h + "a,a.png,normal,d,real,\na,b.png,normal,d,real,\n"), ValidationError);
  EXPECT_THROW(parse_manifest(h + "a,a.png,mitosis,d,real,\n"), ValidationError);
  EXPECT_THROW(parse_manifest(h + "a,a.png,normal,d,synthetic,\n"), ValidationError);
  EXPECT_THROW(parse_manifest(h + "a,a.png,normal,d,real\n"), ValidationError);
  EXPECT_THROW(parse_manifest(h + "a,a.png,normal,d,real,2\n"), ValidationError);
  EXPECT_THROW(parse_manifest("id,label\na,normal\n"), ValidationError);
}

TEST(Manifest, SerializeRoundTrips) {
  const auto m = parse_manifest(std::string(kHeader) + "a,x/a.png,normal,d1,real,\ns,s.png,atypical,syn,synthetic,3\n");
  const auto again = parse_manifest(m.serialize());
  EXPECT_EQ(again.records(), m.records());
  EXPECT_EQ(again.records()[1].origin_fold, 3);
}

TEST(Manifest, LoadChecksImageSize) {
  fixtures::TempDir dir("manifest");
  write_png(dir / "ok.png", fixtures::solid(10, 20, 30));
  write_png(dir / "small.png", fixtures::solid(10, 20, 30, 64));
  write_file_atomic(dir / "good.csv", std::string(kHeader) + "a,ok.png,normal,d,real,\n");
  write_file_atomic(dir / "bad.csv", std::string(kHeader) + "a,small.png,normal,d,real,\n");
  write_file_atomic(dir / "missing.csv", std::string(kHeader) + "a,nothere.png,normal,d,real,\n");
  const auto m = load_manifest(dir / "good.csv");
  EXPECT_EQ(m.records()[0].image_ref, dir / "ok.png");
  EXPECT_THROW(load_manifest(dir / "bad.csv"), ValidationError);
  EXPECT_THROW(load_manifest(dir / "missing.csv"), ValidationError);
  EXPECT_THROW(load_manifest(dir / "absent.csv"), ValidationError);
}

TEST(Manifest, WriteUsesRelativePathsInsideItsDirectory) {
  fixtures::TempDir dir("manifest_w");
  write_png(dir / "img/a.png", fixtures::solid(1, 2, 3));
  PatchRecord r;
  r.id = "a";
  r.image_ref = dir / "img/a.png";
  write_manifest(dir / "m.csv", Manifest({r}));
  EXPECT_NE(read_file(dir / "m.csv").find("a,img/a.png,normal"), std::string::npos);
  EXPECT_EQ(load_manifest(dir / "m.csv").records()[0].image_ref, dir / "img/a.png");
}

TEST(Manifest, FullScaleCountsAndPrevalence) {
  const auto m = fixtures::counted_manifest(10191, 1748);
  EXPECT_EQ(m.count_label(kNormal), 10191u);
  EXPECT_EQ(m.count_label(kAtypical), 1748u);
  const auto c = class_counts(m);
  EXPECT_NEAR(c.prevalence, 1748.0 / 11939.0, 1e-15);
}

TEST(Folds, FivePerClassGivesOneEachPerFold) {
  const auto m = fixtures::counted_manifest(5, 5);
  const auto plan = stratified_kfold(m, 5, 3);
  for (const auto& [neg, pos] : per_fold_counts(m, plan)) {
    EXPECT_EQ(neg, 1);
    EXPECT_EQ(pos, 1);
  }
}

TEST(Folds, StratificationProperty) {
  Rng rng(99);
  for (int trial = 0; trial < 60; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(6));
    const auto neg = static_cast<std::size_t>(k + rng.below(200));
    const auto pos = static_cast<std::size_t>(k + rng.below(60));
    const auto m = fixtures::counted_manifest(neg, pos);
    const auto plan = stratified_kfold(m, k, rng.next_u64());
    ASSERT_EQ(plan.entries().size(), m.size());
    check_plan_covers(plan, m);
    const auto counts = per_fold_counts(m, plan);
    int nmin = 1 << 30, nmax = 0, pmin = 1 << 30, pmax = 0, tmin = 1 << 30, tmax = 0;
    for (const auto& [n, p] : counts) {
      nmin = std::min(nmin, n), nmax = std::max(nmax, n);
      pmin = std::min(pmin, p), pmax = std::max(pmax, p);
      tmin = std::min(tmin, n + p), tmax = std::max(tmax, n + p);
    }
    EXPECT_LE(nmax - nmin, 1);
    EXPECT_LE(pmax - pmin, 1);
    EXPECT_LE(tmax - tmin, 1);
  }
}

TEST(Folds, DeterministicAndSeedSensitive) {
  const auto m = fixtures::counted_manifest(80, 20);
  EXPECT_EQ(stratified_kfold(m, 5, 1), stratified_kfold(m, 5, 1));
  EXPECT_FALSE(stratified_kfold(m, 5, 1) == stratified_kfold(m, 5, 2));
}

TEST(Folds, TooFewMembersAndSyntheticRejected) {
  EXPECT_THROW(stratified_kfold(fixtures::counted_manifest(10, 4), 5, 0), ValidationError);
  EXPECT_THROW(stratified_kfold(fixtures::counted_pool(10, 1, 10), 5, 0), ValidationError);
  EXPECT_THROW(stratified_kfold(fixtures::counted_manifest(10, 10), 1, 0), ValidationError);
}

TEST(Folds, PlanFileRoundTrip) {
  fixtures::TempDir dir("plan");
  const auto m = fixtures::counted_manifest(30, 10);
  const auto plan = stratified_kfold(m, 5, 8);
  write_fold_plan(dir / "plan.csv", plan);
  EXPECT_EQ(read_fold_plan(dir / "plan.csv"), plan);
  write_file_atomic(dir / "bad.csv", "id,fold\nr0,x\n");
  EXPECT_THROW(read_fold_plan(dir / "bad.csv"), ValidationError);
}

TEST(Folds, CoverageDetectsMismatch) {
  const auto plan = stratified_kfold(fixtures::counted_manifest(30, 10), 5, 8);
  EXPECT_THROW(check_plan_covers(plan, fixtures::counted_manifest(31, 10)), ValidationError);
}

TEST(Mixing, RealOnlyViewHasNoSynthetic) {
  const auto m = fixtures::counted_manifest(100, 25);
  const auto plan = stratified_kfold(m, 5, 1);
  MixPolicy policy;
  policy.regime = Regime::real_only;
  const auto pool = fixtures::counted_pool(50, 5);
  for (int f = 0; f < 5; ++f) {
    const auto view = training_view(m, plan, f, policy, pool);
    EXPECT_EQ(view.train.count_provenance(Provenance::synthetic), 0u);
    EXPECT_EQ(view.train.size() + view.val.size(), m.size());
    for (const auto& r : view.val.records()) EXPECT_EQ(plan.fold_of(r.id), f);
    for (const auto& r : view.train.records()) EXPECT_NE(plan.fold_of(r.id), f);
  }
}

TEST(Mixing, SynthBalancedDrawsOnlyFromItsFold) {
  const auto m = fixtures::counted_manifest(100, 25);
  const auto plan = stratified_kfold(m, 5, 1);
  MixPolicy policy;
  policy.regime = Regime::synth_balanced;
  policy.synth_pos_per_fold = 30;
  policy.synth_neg_per_fold = 4;
  policy.seed = 5;
  const auto pool = fixtures::counted_pool(40, 5, 6);
  std::map<std::string, int> origin;
  for (const auto& r : pool.records()) origin[r.id] = *r.origin_fold;
  for (int f = 0; f < 5; ++f) {
    const auto view = training_view(m, plan, f, policy, pool);
    EXPECT_EQ(view.train.count(kAtypical, Provenance::synthetic), 30u);
    EXPECT_EQ(view.train.count(kNormal, Provenance::synthetic), 4u);
    EXPECT_EQ(view.val.count_provenance(Provenance::synthetic), 0u);
    for (const auto& r : view.train.records()) {
      if (r.provenance == Provenance::synthetic) EXPECT_EQ(origin.at(r.id), f);
    }
  }
  EXPECT_EQ(training_view(m, plan, 2, policy, pool).train.records(),
            training_view(m, plan, 2, policy, pool).train.records());
}

TEST(Mixing, Errors) {
  const auto m = fixtures::counted_manifest(100, 25);
  const auto plan = stratified_kfold(m, 5, 1);
  MixPolicy policy;
  policy.regime = Regime::synth_balanced;
  policy.synth_pos_per_fold = 50;
  EXPECT_THROW(training_view(m, plan, 0, policy, fixtures::counted_pool(40, 5)), ValidationError);
  EXPECT_THROW(training_view(m, plan, 0, policy, fixtures::counted_pool(60, 6)), ValidationError);
  EXPECT_THROW(training_view(m, plan, 5, policy, fixtures::counted_pool(60, 5)), ValidationError);
  EXPECT_THROW(training_view(m, plan, 0, policy, m), ValidationError);
  EXPECT_THROW(parse_regime("balanced"), ValidationError);
}

TEST(Mixing, FullScaleCountsGiveNearBalancedTraining) {
  const auto m = fixtures::counted_manifest(10191, 1748);
  const auto plan = stratified_kfold(m, 5, 0);
  MixPolicy policy;
  policy.regime = Regime::synth_balanced;
  const auto pool = fixtures::counted_pool(7667, 5);
  for (int f = 0; f < 5; ++f) {
    const auto prevalence = class_counts(training_view(m, plan, f, policy, pool).train).prevalence;
    EXPECT_GE(prevalence, 0.48);
    EXPECT_LE(prevalence, 0.56);
  }
}
