#include "mitosyn/orchestration/experiment.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cstdio>
#include <sstream>

#include "mitosyn/core/error.hpp"
#include "mitosyn/core/io.hpp"

namespace mitosyn::orchestration {
namespace {

std::optional<std::uint64_t> g_seed;

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  const std::filesystem::path p(value);
  if (p.is_absolute() || base.empty()) return p;
  return (base / p).lexically_normal();
}

std::string sd_token(metrics::SdConvention c) { return c == metrics::SdConvention::population ? "population" : "sample"; }

metrics::SdConvention parse_sd(const std::string& token) {
  if (token == "population") return metrics::SdConvention::population;
  if (token == "sample") return metrics::SdConvention::sample;
  throw ValidationError("metrics.sd_convention must be population or sample");
}

std::string probability_rows(const dataset::Manifest& val, const std::vector<double>& probs) {
  std::string out = "id,probability,label\n";
  char buf[64];
  for (std::size_t i = 0; i < probs.size(); ++i) {
    std::snprintf(buf, sizeof(buf), ",%.6f,%d\n", probs[i], val.records()[i].label);
    out += val.records()[i].id + buf;
  }
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (manifest.empty()) throw ValidationError("data.manifest is required");
  if (regime == dataset::Regime::synth_balanced && !synth_pool) {
    throw ValidationError("synth_balanced regime requires data.synth_pool");
  }
  if (k < 2) throw ValidationError("experiment.k must be >= 2");
  if (name.empty() || name.find_first_of("/\\") != std::string::npos) {
    throw ValidationError("experiment.name must be a plain name");
  }
  if (output_dir.empty()) throw ValidationError("experiment.output_dir is required");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ValidationError("metrics.threshold must lie in [0, 1]");
  backbone.validate();
  train.validate();
  augment.validate();
}

KvConfig ExperimentConfig::to_kv() const {
  KvConfig kv;
  kv.set("data.manifest", manifest.string());
  kv.set("data.synth_pool", synth_pool ? synth_pool->string() : std::string());
  kv.set("data.plan", plan ? plan->string() : std::string());
  kv.set("experiment.name", name);
  kv.set("experiment.regime", std::string(dataset::to_string(regime)));
  kv.set("experiment.k", k);
  kv.set("experiment.seed", std::to_string(seed));
  kv.set("experiment.output_dir", output_dir.string());
  kv.merge("model", backbone.to_kv());
  kv.merge("train", train.to_kv());
  kv.merge("augment", augment.to_kv());
  kv.set("mix.synth_pos_per_fold", static_cast<std::int64_t>(synth_pos_per_fold));
  kv.set("mix.synth_neg_per_fold", static_cast<std::int64_t>(synth_neg_per_fold));
  kv.set("metrics.threshold", threshold);
  kv.set("metrics.sd_convention", sd_token(sd_convention));
  return kv;
}

ExperimentConfig ExperimentConfig::from_kv(const KvConfig& kv, const std::filesystem::path& base_dir) {
  static const char* kNamespaces[] = {"data.", "experiment.", "model.", "train.", "augment.", "mix.", "metrics."};
  for (const auto& [key, value] : kv.entries()) {
    const bool known = std::any_of(std::begin(kNamespaces), std::end(kNamespaces),
                                   [&](const char* ns) { return key.rfind(ns, 0) == 0; });
    if (!known) throw ValidationError("unknown config key '" + key + "'");
  }
  ExperimentConfig c;
  c.manifest = resolve(base_dir, kv.get_string("data.manifest"));
  if (const auto pool = kv.get_string("data.synth_pool", ""); !pool.empty()) c.synth_pool = resolve(base_dir, pool);
  if (const auto plan = kv.get_string("data.plan", ""); !plan.empty()) c.plan = resolve(base_dir, plan);
  c.name = kv.get_string("experiment.name", c.name);
  c.regime = dataset::parse_regime(kv.get_string("experiment.regime", "real_only"));
  c.k = static_cast<int>(kv.get_int("experiment.k", c.k));
  const std::string seed_text = kv.get_string("experiment.seed", "0");
  try {
    std::size_t used = 0;
    c.seed = std::stoull(seed_text, &used);
    if (used != seed_text.size() || seed_text.front() == '-') throw std::invalid_argument(seed_text);
  } catch (const std::exception&) {
    throw ValidationError("experiment.seed must be a non-negative integer");
  }
  c.output_dir = resolve(base_dir, kv.get_string("experiment.output_dir", "runs/" + c.name));
  c.backbone = classifier::BackboneSpec::from_kv(kv.subtree("model"));
  if (c.backbone.is_plugin()) c.backbone.weight_source = resolve(base_dir, c.backbone.weight_source).string();
  c.train = classifier::TrainConfig::from_kv(kv.subtree("train"), c.backbone.family);
  c.augment = transforms::AugmentConfig::from_kv(kv.subtree("augment"));
  const auto pos = kv.get_int("mix.synth_pos_per_fold", static_cast<std::int64_t>(c.synth_pos_per_fold));
  const auto neg = kv.get_int("mix.synth_neg_per_fold", static_cast<std::int64_t>(c.synth_neg_per_fold));
  if (pos < 0 || neg < 0) throw ValidationError("mix counts must be >= 0");
  c.synth_pos_per_fold = static_cast<std::size_t>(pos);
  c.synth_neg_per_fold = static_cast<std::size_t>(neg);
  c.threshold = kv.get_double("metrics.threshold", c.threshold);
  c.sd_convention = parse_sd(kv.get_string("metrics.sd_convention", "population"));
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  return from_kv(KvConfig::parse(read_file(path)), path.parent_path());
}

dataset::MixPolicy ExperimentConfig::mix_policy() const {
  dataset::MixPolicy p;
  p.regime = regime;
  p.synth_pos_per_fold = synth_pos_per_fold;
  p.synth_neg_per_fold = synth_neg_per_fold;
  p.seed = derive_seed(seed, "mix");
  return p;
}

void set_determinism(std::uint64_t seed) {
  g_seed = seed;
  Eigen::setNbThreads(1);
}

std::optional<std::uint64_t> determinism_seed() { return g_seed; }

namespace layout {
std::filesystem::path fold_dir(const std::filesystem::path& run, int fold) {
  return run / ("fold_" + std::to_string(fold));
}
std::filesystem::path summary_file(const std::filesystem::path& run, const std::string& metric) {
  return run / ("summary_" + metric + ".csv");
}
}  // namespace layout

RunArtifacts run_cv_experiment(const ExperimentConfig& config, const std::string& input_text) {
  config.validate();
  set_determinism(config.seed);
  const auto& dir = config.output_dir;
  std::filesystem::create_directories(dir);
  std::filesystem::remove(dir / layout::kComplete);
  write_file_atomic(dir / layout::kIncomplete, "status=running\n");

  RunArtifacts art;
  art.dir = dir;
  art.snapshot = config.to_kv();
  try {
    write_file_atomic(dir / layout::kSnapshot, art.snapshot.render());
    if (!input_text.empty()) write_file_atomic(dir / layout::kInputCopy, input_text);

    const dataset::Manifest manifest = dataset::load_manifest(config.manifest);
    if (manifest.count_provenance(dataset::Provenance::synthetic) > 0) {
      throw ValidationError("data.manifest must list real records only");
    }
    art.plan = config.plan ? dataset::read_fold_plan(*config.plan, config.seed)
                           : dataset::stratified_kfold(manifest, config.k, config.seed);
    if (art.plan.k() != config.k) throw ValidationError("fold plan k differs from experiment.k");
    dataset::check_plan_covers(art.plan, manifest);
    write_file_atomic(dir / layout::kPlan, art.plan.serialize());

    dataset::Manifest pool;
    if (config.regime == dataset::Regime::synth_balanced) pool = dataset::load_manifest(*config.synth_pool);
    const auto policy = config.mix_policy();

    PatchCache cache;
    for (int fold = 0; fold < config.k; ++fold) {
      const auto view = dataset::training_view(manifest, art.plan, fold, policy, pool);
      const auto ck = classifier::train_fold(view.train, view.val, config.backbone, config.train, config.augment,
                                             derive_seed(config.seed, static_cast<std::uint64_t>(fold)), fold, &cache);
      std::vector<Image> val_images;
      for (const auto& r : view.val.records()) val_images.push_back(cache.get(r.image_ref));
      metrics::ScoredSet set;
      set.probabilities = classifier::predict_proba(ck, val_images);
      for (const auto& r : view.val.records()) set.labels.push_back(r.label);
      const auto report = metrics::evaluate(set, config.threshold);

      const auto fdir = layout::fold_dir(dir, fold);
      ck.save(fdir / "checkpoint.json");
      write_file_atomic(fdir / "train.log", classifier::render_run_log(ck.log));
      KvConfig fold_kv = report.to_kv();
      fold_kv.set("fold", fold);
      fold_kv.set("selected_epoch", ck.selected_epoch);
      fold_kv.set("train_size", static_cast<std::int64_t>(view.train.size()));
      fold_kv.set("train_synthetic", static_cast<std::int64_t>(view.train.count_provenance(dataset::Provenance::synthetic)));
      fold_kv.set("train_prevalence", dataset::class_counts(view.train).prevalence);
      fold_kv.set("val_size", static_cast<std::int64_t>(view.val.size()));
      write_file_atomic(fdir / "metrics.kv", fold_kv.render());
      write_file_atomic(fdir / "val_predictions.csv", probability_rows(view.val, set.probabilities));

      art.checkpoints.push_back(fdir / "checkpoint.json");
      art.reports.push_back(report);
      art.logs.push_back(ck.log);
    }

    for (const auto& metric : metrics::metric_names()) {
      std::vector<double> values;
      for (const auto& r : art.reports) values.push_back(metrics::metric_value(r, metric));
      art.summaries[metric] = metrics::aggregate_folds(values, config.sd_convention);
      write_file_atomic(layout::summary_file(dir, metric), art.summaries[metric].to_csv());
    }
    KvConfig info;
    info.set("seed", std::to_string(config.seed));
    info.set("regime", std::string(dataset::to_string(config.regime)));
    info.set("family", std::string(classifier::to_string(config.backbone.family)));
    info.set("k", config.k);
    info.set("name", config.name);
    write_file_atomic(dir / layout::kRunInfo, info.render());
  } catch (const std::exception& e) {
    write_file_atomic(dir / layout::kIncomplete, std::string("status=failed\nerror=") + e.what() + "\n");
    throw;
  }
  write_file_atomic(dir / layout::kComplete, "status=complete\n");
  std::filesystem::remove(dir / layout::kIncomplete);
  art.complete = true;
  return art;
}

RunArtifacts RunArtifacts::load(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / layout::kComplete)) {
    throw ValidationError("run directory " + dir.string() + " is not complete");
  }
  RunArtifacts art;
  art.dir = dir;
  art.complete = true;
  art.snapshot = KvConfig::parse(read_file(dir / layout::kSnapshot));
  const int k = static_cast<int>(art.snapshot.get_int("experiment.k"));
  const KvConfig info = KvConfig::parse(read_file(dir / layout::kRunInfo));
  art.plan = dataset::read_fold_plan(dir / layout::kPlan, std::stoull(info.get_string("seed")));
  for (int fold = 0; fold < k; ++fold) {
    const auto fdir = layout::fold_dir(dir, fold);
    if (!std::filesystem::exists(fdir / "checkpoint.json")) throw ValidationError("missing checkpoint for fold " + std::to_string(fold));
    art.checkpoints.push_back(fdir / "checkpoint.json");
    art.reports.push_back(metrics::MetricsReport::from_kv(KvConfig::parse(read_file(fdir / "metrics.kv"))));
    art.logs.push_back(classifier::parse_run_log(read_file(fdir / "train.log")));
  }
  for (const auto& metric : metrics::metric_names()) {
    art.summaries[metric] = metrics::FoldSummary::from_csv(read_file(layout::summary_file(dir, metric)));
    if (static_cast<int>(art.summaries[metric].values.size()) != k) {
      throw ValidationError("summary for " + metric + " does not have k values");
    }
  }
  return art;
}

SummaryDelta summary_delta(const metrics::FoldSummary& a, const metrics::FoldSummary& b) {
  if (a.values.size() != b.values.size()) throw ValidationError("summaries have different fold counts");
  SummaryDelta d;
  for (std::size_t i = 0; i < a.values.size(); ++i) d.per_fold.push_back(a.values[i] - b.values[i]);
  d.mean_delta = a.mean - b.mean;
  return d;
}

RegimeComparison compare_regimes(const RunArtifacts& a, const RunArtifacts& b) {
  const auto family_a = a.snapshot.get_string("model.family");
  if (family_a != b.snapshot.get_string("model.family")) throw ValidationError("runs use different backbones");
  if (a.plan.k() != b.plan.k()) throw ValidationError("runs use different fold counts");
  if (!(a.plan == b.plan)) throw ValidationError("runs use mismatched fold plans");
  RegimeComparison c;
  c.backbone = family_a;
  c.label_a = a.snapshot.get_string("experiment.name") + " (" + a.snapshot.get_string("experiment.regime") + ")";
  c.label_b = b.snapshot.get_string("experiment.name") + " (" + b.snapshot.get_string("experiment.regime") + ")";
  c.a = a.summaries;
  c.b = b.summaries;
  for (const auto& metric : metrics::metric_names()) c.deltas[metric] = summary_delta(a.summaries.at(metric), b.summaries.at(metric));
  return c;
}

std::string RegimeComparison::render() const {
  std::ostringstream out;
  out << "backbone: " << backbone << "\n";
  out << "a: " << label_a << "\n";
  out << "b: " << label_b << "\n";
  for (const auto& [metric, d] : deltas) {
    out << metric << ": a " << metrics::format_mean_sd(a.at(metric)) << ", b " << metrics::format_mean_sd(b.at(metric))
        << ", delta " << (d.mean_delta >= 0 ? "+" : "") << metrics::format_fixed2(d.mean_delta) << " (per fold";
    for (double v : d.per_fold) out << " " << (v >= 0 ? "+" : "") << metrics::format_fixed2(v);
    out << ")\n";
  }
  return out.str();
}

}  // namespace mitosyn::orchestration
