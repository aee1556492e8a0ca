#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "mitosyn/core/error.hpp"
#include "mitosyn/dataset/folds.hpp"
#include "mitosyn/generator/generator.hpp"
#include "mitosyn/orchestration/generation.hpp"
#include "support.hpp"

using namespace mitosyn;
using namespace mitosyn::generator;

namespace {

GenStageConfig quick_config() {
  auto c = GenStageConfig::tiny();
  c.pretrain = {2, 2, 8, 2e-3, 0.01};
  c.finetune = {1, 2, 8, 2e-3, 0.01};
  return c;
}

nn::Matrix normal_matrix(nn::Index r, nn::Index c, Rng& rng) {
  nn::Matrix m(r, c);
  for (nn::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.normal());
  return m;
}

}  // namespace

TEST(Schedule, LinearBetasAndProductOracle) {
  const auto s = build_noise_schedule(1000, 1e-4, 0.02);
  ASSERT_EQ(s.steps(), 1000);
  EXPECT_DOUBLE_EQ(s.beta_at(1), 1e-4);
  EXPECT_NEAR(s.beta_at(1000), 0.02, 1e-15);
  EXPECT_NEAR(s.beta_at(500), 1e-4 + (0.02 - 1e-4) * 499.0 / 999.0, 1e-15);
  long double prod = 1.0L;
  for (int t = 1; t <= 1000; ++t) {
    const long double beta = 1e-4L + (0.02L - 1e-4L) * (t - 1) / 999.0L;
    prod *= 1.0L - beta;
    ASSERT_NEAR(s.alpha_bar_at(t), static_cast<double>(prod), 1e-12 * std::max(1.0L, prod));
  }
  EXPECT_NEAR(s.alpha_bar_at(1000), 4.0358e-5, 5e-9);
  EXPECT_TRUE(s.valid());
  EXPECT_THROW(build_noise_schedule(0, 1e-4, 0.02), ValidationError);
  EXPECT_THROW(build_noise_schedule(10, 0.03, 0.02), ValidationError);
  EXPECT_THROW(build_noise_schedule(10, 1e-4, 1.0), ValidationError);
}

TEST(Schedule, ValidityProperty) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const int steps = 1 + static_cast<int>(rng.below(2000));
    const double lo = rng.uniform(1e-6, 0.05);
    const double hi = rng.uniform(lo, 0.5);
    const auto s = build_noise_schedule(steps, lo, hi);
    ASSERT_TRUE(s.valid());
    for (int t = 1; t <= steps; ++t) ASSERT_NEAR(s.alpha_at(t), 1.0 - s.beta_at(t), 1e-15);
  }
}

TEST(Schedule, ClosedFormMatchesIteratedChain) {
  const auto s = build_noise_schedule(50, 2e-3, 0.3);
  const int t = 20, n = 20000;
  const float x0 = 1.5f;
  Rng rng(2);
  // Iterate x_t = sqrt(alpha_t) x_{t-1} + sqrt(beta_t) eps_t.
  nn::Matrix x = nn::Matrix::Constant(n, 1, x0);
  for (int step = 1; step <= t; ++step) {
    x = std::sqrt(static_cast<float>(s.alpha_at(step))) * x +
        std::sqrt(static_cast<float>(s.beta_at(step))) * normal_matrix(n, 1, rng);
  }
  const nn::Matrix closed = forward_diffuse(nn::Matrix::Constant(n, 1, x0), t, normal_matrix(n, 1, rng), s);
  const double ab = s.alpha_bar_at(t);
  const double mean_expected = std::sqrt(ab) * x0, var_expected = 1.0 - ab;
  for (const nn::Matrix* m : std::vector<const nn::Matrix*>{&x, &closed}) {
    const double mean = m->mean();
    const double var = (m->array() - mean).square().mean();
    const double se = std::sqrt(var_expected / n);
    EXPECT_NEAR(mean, mean_expected, 5 * se);
    EXPECT_NEAR(var, var_expected, 5 * var_expected * std::sqrt(2.0 / n));
  }
  EXPECT_THROW(forward_diffuse(closed, 51, closed, s), ValidationError);
}

TEST(Codec, TokenPermutationIsInvertible) {
  Rng rng(3);
  for (int side : {2, 4, 8}) {
    for (int q : {1, 2}) {
      const nn::Matrix grid = normal_matrix(3 * side * side, 4, rng);
      const auto tokens = grid_to_tokens(grid, side, q);
      EXPECT_EQ(tokens.rows(), 3 * (side / q) * (side / q));
      EXPECT_EQ(tokens_to_grid(tokens, side, q), grid);
    }
  }
  EXPECT_THROW(grid_to_tokens(normal_matrix(9, 1, rng), 3, 2), ValidationError);
}

TEST(Codec, ImageGridRoundTrip) {
  const std::vector<Image> images = {fixtures::solid(0, 128, 255, 8), fixtures::solid(10, 20, 30, 8)};
  const auto grid = images_to_grid(images);
  EXPECT_FLOAT_EQ(grid(0, 0), -1.0f);
  EXPECT_FLOAT_EQ(grid(0, 2), 1.0f);
  EXPECT_EQ(grid_to_images(grid, 8), images);
}

TEST(VaeLoss, KnownValues) {
  const std::vector<double> x = {1.0, 0.0}, recon = {0.0, 0.0}, zero = {0.0}, one = {1.0};
  EXPECT_DOUBLE_EQ(vae_loss({x, x, zero, zero, 1.0, 1}), 0.0);
  EXPECT_DOUBLE_EQ(vae_loss({x, recon, zero, zero, 1.0, 1}), 0.5);
  EXPECT_DOUBLE_EQ(vae_loss({x, x, one, zero, 1.0, 1}), 0.5);
  EXPECT_DOUBLE_EQ(vae_loss({x, x, one, zero, 1e-6, 1}), 0.5e-6);
  // logvar = 1: (e - 1 - 1) / 2.
  EXPECT_NEAR(vae_loss({x, x, zero, one, 1.0, 1}), (std::exp(1.0) - 2.0) / 2.0, 1e-15);
  // KL is summed over dimensions and divided by the batch.
  const std::vector<double> mu2 = {1.0, 1.0}, lv2 = {0.0, 0.0};
  EXPECT_DOUBLE_EQ(vae_loss({x, x, mu2, lv2, 1.0, 2}), 0.5);
  EXPECT_THROW(vae_loss({x, one, zero, zero, 1.0, 1}), ValidationError);
}

TEST(VaeLoss, GradientMatchesFiniteDifference) {
  Rng rng(4);
  std::vector<double> x(6), recon(6), mu(4), logvar(4);
  for (auto* v : {&x, &recon, &mu, &logvar}) {
    for (double& e : *v) e = rng.uniform(-1.0, 1.0);
  }
  const VaeLossInput in{x, recon, mu, logvar, 0.3, 2};
  const auto g = vae_loss_grad(in);
  const double h = 1e-6;
  auto check = [&](std::vector<double>& target, const std::vector<double>& grad) {
    for (std::size_t i = 0; i < target.size(); ++i) {
      const double keep = target[i];
      target[i] = keep + h;
      const double up = vae_loss({x, recon, mu, logvar, 0.3, 2});
      target[i] = keep - h;
      const double down = vae_loss({x, recon, mu, logvar, 0.3, 2});
      target[i] = keep;
      EXPECT_NEAR(grad[i], (up - down) / (2 * h), 1e-7);
    }
  };
  check(recon, g.recon);
  check(mu, g.mu);
  check(logvar, g.logvar);
}

TEST(Diffusion, LossWithExactAndZeroPredictors) {
  const auto s = build_noise_schedule(50, 2e-3, 0.3);
  const LatentShape shape{2, 3};
  const std::size_t n = 400;
  const nn::Matrix z0 = nn::Matrix::Zero(static_cast<nn::Index>(n) * shape.cells(), shape.channels);
  const std::vector<Condition> conds(n, Condition::unconditional);
  // With z0 = 0, z_t = sqrt(1 - alpha_bar) eps, so eps is recoverable exactly.
  NoisePredictor exact = [&](const nn::Matrix& z, const std::vector<int>& steps, const std::vector<Condition>&) {
    nn::Matrix out = z;
    const auto per = static_cast<nn::Index>(shape.cells());
    for (std::size_t i = 0; i < steps.size(); ++i) {
      out.middleRows(static_cast<nn::Index>(i) * per, per) /=
          static_cast<float>(std::sqrt(1.0 - s.alpha_bar_at(steps[i])));
    }
    return nn::Var(out);
  };
  NoisePredictor zero = [](const nn::Matrix& z, const std::vector<int>&, const std::vector<Condition>&) {
    return nn::Var(nn::Matrix::Zero(z.rows(), z.cols()));
  };
  Rng rng(5);
  EXPECT_LT(ddpm_loss(exact, z0, conds, s, shape, rng).item(), 1e-8);
  const double zero_loss = ddpm_loss(zero, z0, conds, s, shape, rng).item();
  const double count = static_cast<double>(n) * shape.elements();
  EXPECT_NEAR(zero_loss, 1.0, 5 * std::sqrt(2.0 / count));
}

TEST(Diffusion, AncestralSamplingRecoversGaussianTargets) {
  // Data: z0 ~ N(m_c, s^2) per element, with the class picking m_c. The
  // optimal noise prediction is then available in closed form.
  const auto s = build_noise_schedule(200, 1e-4, 0.1);
  const double sd = 0.5;
  const std::array<double, 2> means = {-2.0, 1.5};
  const LatentShape shape{1, 1};
  NoisePredictor oracle = [&](const nn::Matrix& z, const std::vector<int>& steps, const std::vector<Condition>& c) {
    nn::Matrix out(z.rows(), z.cols());
    for (nn::Index i = 0; i < z.rows(); ++i) {
      const double ab = s.alpha_bar_at(steps[i]);
      const double m = means[static_cast<int>(c[i])];
      out(i, 0) = static_cast<float>(std::sqrt(1.0 - ab) * (z(i, 0) - std::sqrt(ab) * m) / (ab * sd * sd + 1.0 - ab));
    }
    return nn::Var(out);
  };
  std::vector<Condition> conds;
  for (int i = 0; i < 4000; ++i) conds.push_back(i % 2 ? Condition::atypical : Condition::normal);
  Rng rng(6);
  const auto z = sample_latents(oracle, s, shape, conds, rng);
  for (int cls = 0; cls < 2; ++cls) {
    double sum = 0.0, sq = 0.0;
    for (nn::Index i = cls; i < z.rows(); i += 2) sum += z(i, 0);
    const double mean = sum / 2000.0;
    for (nn::Index i = cls; i < z.rows(); i += 2) sq += (z(i, 0) - mean) * (z(i, 0) - mean);
    EXPECT_NEAR(mean, means[cls], 0.05);
    EXPECT_NEAR(std::sqrt(sq / 2000.0), sd, 0.05);
  }
}

TEST(Generator, ProfilesAndConfigRoundTrip) {
  const auto full = GenStageConfig::full();
  EXPECT_EQ(full.schedule.steps, 1000);
  EXPECT_EQ(full.codec.latent.side, 16);
  EXPECT_EQ(full.pretrain.vae_epochs, 1000);
  EXPECT_EQ(full.finetune.ddpm_epochs, 5000);
  const auto tiny = GenStageConfig::tiny();
  EXPECT_EQ(GenStageConfig::from_kv(tiny.to_kv()).fingerprint(), tiny.fingerprint());
  EXPECT_NE(tiny.fingerprint(), full.fingerprint());
  KvConfig o;
  o.set("finetune.ddpm_epochs", 7);
  EXPECT_EQ(orchestration::generator_profile("tiny", o).finetune.ddpm_epochs, 7);
  o.set("bogus", 1);
  EXPECT_THROW(orchestration::generator_profile("tiny", o), ValidationError);
  EXPECT_THROW(orchestration::generator_profile("huge"), ValidationError);
}

TEST(Generator, PoolQuotas) {
  SynthPoolSpec spec;
  EXPECT_EQ(spec.quota(20000), (std::vector<std::size_t>(5, 4000)));
  EXPECT_EQ(spec.quota(10191), (std::vector<std::size_t>{2039, 2038, 2038, 2038, 2038}));
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    spec.folds = 1 + static_cast<int>(rng.below(10));
    const auto total = static_cast<std::size_t>(rng.below(5000));
    const auto q = spec.quota(total);
    ASSERT_EQ(q.size(), static_cast<std::size_t>(spec.folds));
    std::size_t sum = 0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      sum += q[i];
      if (i > 0) EXPECT_LE(q[i], q[i - 1]);
    }
    EXPECT_EQ(sum, total);
    EXPECT_LE(q.front() - q.back(), 1u);
  }
}

TEST(Generator, CodecReconstructionImproves) {
  fixtures::TempDir dir("vae");
  const auto images = load_images(fixtures::small_toy(dir.path(), 120, 3));
  Rng init(8);
  LatentCodec codec(GenStageConfig::tiny().codec, init);
  const double before = reconstruction_error(codec, images);
  Rng rng(9);
  const auto losses = train_codec(codec, images, 40, 16, 2e-3, 0.01, 1e-6, rng);
  ASSERT_EQ(losses.size(), 40u);
  const double after = reconstruction_error(codec, images);
  EXPECT_LE(after, 0.5 * before);
  EXPECT_LT(losses.back(), losses.front());
}

class GeneratorPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fixtures::TempDir("gen");
    manifest_ = new dataset::Manifest(fixtures::small_toy(dir_->path(), 30, 4, 0.4));
    plan_ = new dataset::FoldPlan(dataset::stratified_kfold(*manifest_, 3, 1));
    base_ = new GeneratorCheckpoint(pretrain_generator(*manifest_, quick_config(), 2));
    folds_ = new std::vector<GeneratorCheckpoint>(finetune_generator(*manifest_, *plan_, *base_, quick_config(), 3));
  }
  static void TearDownTestSuite() {
    delete folds_;
    delete base_;
    delete plan_;
    delete manifest_;
    delete dir_;
  }
  static fixtures::TempDir* dir_;
  static dataset::Manifest* manifest_;
  static dataset::FoldPlan* plan_;
  static GeneratorCheckpoint* base_;
  static std::vector<GeneratorCheckpoint>* folds_;
};
fixtures::TempDir* GeneratorPipeline::dir_ = nullptr;
dataset::Manifest* GeneratorPipeline::manifest_ = nullptr;
dataset::FoldPlan* GeneratorPipeline::plan_ = nullptr;
GeneratorCheckpoint* GeneratorPipeline::base_ = nullptr;
std::vector<GeneratorCheckpoint>* GeneratorPipeline::folds_ = nullptr;

TEST_F(GeneratorPipeline, PretrainRecordsLossesAndIds) {
  EXPECT_FALSE(base_->conditional);
  EXPECT_FALSE(base_->fold.has_value());
  EXPECT_EQ(base_->vae_losses.size(), 2u);
  EXPECT_EQ(base_->ddpm_losses.size(), 2u);
  EXPECT_EQ(base_->training_ids.size(), manifest_->size());
  EXPECT_GT(base_->latent_scale, 0.0);
}

TEST_F(GeneratorPipeline, FineTunedFoldsExcludeTheirValidation) {
  ASSERT_EQ(folds_->size(), 3u);
  for (int f = 0; f < 3; ++f) {
    const auto& ck = (*folds_)[static_cast<std::size_t>(f)];
    EXPECT_TRUE(ck.conditional);
    EXPECT_EQ(ck.fold, f);
    const auto val = plan_->ids_in_fold(f);
    const std::set<std::string> held(val.begin(), val.end());
    EXPECT_EQ(ck.training_ids.size(), manifest_->size() - held.size());
    for (const auto& id : ck.training_ids) EXPECT_FALSE(held.count(id)) << id;
  }
  orchestration::audit_fold_disjointness(*folds_, *plan_);
  auto leaky = (*folds_)[0].clone();
  leaky.training_ids.push_back(plan_->ids_in_fold(0).front());
  std::vector<GeneratorCheckpoint> bad;
  bad.push_back(std::move(leaky));
  EXPECT_THROW(orchestration::audit_fold_disjointness(bad, *plan_), ValidationError);
}

TEST_F(GeneratorPipeline, SamplingIsDeterministic) {
  const auto& ck = (*folds_)[1];
  EXPECT_TRUE(sample_synthetic(ck, Condition::atypical, 0, 1).empty());
  const auto a = sample_synthetic(ck, Condition::atypical, 3, 42);
  const auto b = sample_synthetic(ck, Condition::atypical, 3, 42);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a[0].width, kPatchSide);
  EXPECT_NE(a, sample_synthetic(ck, Condition::atypical, 3, 43));
  EXPECT_THROW(sample_synthetic(*base_, Condition::atypical, 1, 1), ValidationError);
}

TEST_F(GeneratorPipeline, CheckpointRoundTrip) {
  fixtures::TempDir dir("genck");
  (*folds_)[2].save(dir / "f2.json");
  const auto back = GeneratorCheckpoint::load(dir / "f2.json");
  EXPECT_EQ(back.fold, 2);
  EXPECT_EQ(back.training_ids, (*folds_)[2].training_ids);
  EXPECT_EQ(back.latent_scale, (*folds_)[2].latent_scale);
  EXPECT_EQ(sample_synthetic(back, Condition::normal, 2, 5), sample_synthetic((*folds_)[2], Condition::normal, 2, 5));
}

TEST_F(GeneratorPipeline, PoolFollowsQuotasAndFoldOrigins) {
  fixtures::TempDir dir("pool");
  SynthPoolSpec spec;
  spec.atypical_total = 7;
  spec.normal_total = 4;
  spec.folds = 3;
  const auto pool = build_synth_pool(*folds_, spec, 9, dir.path());
  EXPECT_EQ(pool.count(dataset::kAtypical, dataset::Provenance::synthetic), 7u);
  EXPECT_EQ(pool.count(dataset::kNormal, dataset::Provenance::synthetic), 4u);
  std::array<int, 3> atyp{};
  for (const auto& r : pool.records()) {
    ASSERT_TRUE(r.origin_fold.has_value());
    if (r.label == dataset::kAtypical) atyp[static_cast<std::size_t>(*r.origin_fold)]++;
  }
  EXPECT_EQ(atyp, (std::array<int, 3>{3, 2, 2}));
  EXPECT_EQ(dataset::load_manifest(dir / "manifest.csv").size(), 11u);
  std::vector<GeneratorCheckpoint> dup;
  dup.push_back((*folds_)[0].clone());
  dup.push_back((*folds_)[0].clone());
  spec.folds = 2;
  EXPECT_THROW(build_synth_pool(dup, spec, 9, dir / "x"), ValidationError);
}
