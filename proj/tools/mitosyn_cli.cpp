// Command-line front end. Exit codes: 0 success, 1 validation error, 2 runtime failure.
#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>

#include "mitosyn/core/error.hpp"
#include "mitosyn/core/io.hpp"
#include "mitosyn/dataset/folds.hpp"
#include "mitosyn/orchestration/experiment.hpp"
#include "mitosyn/orchestration/generation.hpp"
#include "mitosyn/orchestration/report.hpp"
#include "mitosyn/toy/toy.hpp"

using namespace mitosyn;

namespace {

constexpr const char* kEnvOutput = "MITOSYN_OUTPUT_DIR";
constexpr const char* kEnvSeed = "MITOSYN_SEED";

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

std::uint64_t parse_seed(const std::string& text) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used);
    if (used == text.size() && text.front() != '-') return v;
  } catch (const std::exception&) {
  }
  throw ValidationError("seed must be a non-negative integer, got '" + text + "'");
}

// Explicit flag > environment > fallback.
std::uint64_t resolve_seed(const std::optional<std::string>& flag, std::uint64_t fallback) {
  if (flag) return parse_seed(*flag);
  if (auto e = env(kEnvSeed)) return parse_seed(*e);
  return fallback;
}

std::filesystem::path resolve_out(const std::optional<std::string>& flag, const std::filesystem::path& fallback) {
  if (flag) return *flag;
  if (auto e = env(kEnvOutput)) return *e;
  return fallback;
}

void emit(const std::string& text, const std::optional<std::string>& out) {
  if (out) {
    write_file_atomic(*out, text);
  } else {
    std::cout << text;
  }
}

std::vector<classifier::FoldCheckpoint> collect_checkpoints(const std::vector<std::string>& runs,
                                                           const std::vector<std::string>& files) {
  std::vector<classifier::FoldCheckpoint> out;
  for (const auto& run : runs) {
    for (const auto& path : orchestration::RunArtifacts::load(run).checkpoints) {
      out.push_back(classifier::FoldCheckpoint::load(path));
    }
  }
  for (const auto& f : files) out.push_back(classifier::FoldCheckpoint::load(f));
  if (out.empty()) throw ValidationError("pass --run or --checkpoint");
  return out;
}

std::string counts_text(const dataset::Manifest& m) {
  KvConfig kv;
  kv.set("records", static_cast<std::int64_t>(m.size()));
  kv.set("normal", static_cast<std::int64_t>(m.count_label(dataset::kNormal)));
  kv.set("atypical", static_cast<std::int64_t>(m.count_label(dataset::kAtypical)));
  kv.set("real", static_cast<std::int64_t>(m.count_provenance(dataset::Provenance::real)));
  kv.set("synthetic", static_cast<std::int64_t>(m.count_provenance(dataset::Provenance::synthetic)));
  std::map<std::string, std::int64_t> domains;
  for (const auto& r : m.records()) ++domains[r.domain];
  for (const auto& [d, n] : domains) kv.set("domain." + d, n);
  kv.set("prevalence", dataset::class_counts(m).prevalence);
  return kv.render();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mitosyn: synthetic balancing experiments for mitosis patch classification"};
  app.require_subcommand(1);
  std::optional<std::string> seed_flag, out_flag;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate a manifest and print its counts");
  std::string ingest_manifest;
  ingest->add_option("--manifest", ingest_manifest, "Manifest CSV")->required();
  ingest->add_option("--out", out_flag, "Write the counts here instead of stdout");

  // split
  auto* split = app.add_subcommand("split", "Stratified k-fold plan");
  std::string split_manifest;
  int split_k = 5;
  split->add_option("--manifest", split_manifest, "Manifest CSV")->required();
  split->add_option("--k", split_k, "Fold count");
  split->add_option("--seed", seed_flag, "Seed");
  split->add_option("--out", out_flag, "Plan CSV path");

  // train-generator
  auto* tg = app.add_subcommand("train-generator", "Pretrain and fine-tune per-fold generators");
  std::string tg_manifest, tg_plan, tg_profile = "tiny";
  std::optional<std::string> tg_unlabeled, tg_config;
  tg->add_option("--manifest", tg_manifest, "Labeled real manifest")->required();
  tg->add_option("--unlabeled", tg_unlabeled, "Unlabeled manifest for pretraining (default: --manifest)");
  tg->add_option("--plan", tg_plan, "Fold plan CSV")->required();
  tg->add_option("--profile", tg_profile, "tiny or full");
  tg->add_option("--config", tg_config, "key=value overrides of the profile");
  tg->add_option("--seed", seed_flag, "Seed");
  tg->add_option("--out", out_flag, "Output directory");

  // sample
  auto* sample = app.add_subcommand("sample", "Sample images from a generator checkpoint");
  std::string sample_ckpt, sample_class = "atypical";
  std::size_t sample_count = 16;
  sample->add_option("--checkpoint", sample_ckpt, "Generator checkpoint")->required();
  sample->add_option("--class", sample_class, "normal, atypical or unconditional");
  sample->add_option("--count", sample_count, "Number of images");
  sample->add_option("--seed", seed_flag, "Seed");
  sample->add_option("--out", out_flag, "Output directory");

  // build-pool
  auto* pool = app.add_subcommand("build-pool", "Synthetic pool from per-fold generators");
  std::string pool_generators;
  generator::SynthPoolSpec pool_spec;
  pool->add_option("--generators", pool_generators, "Directory written by train-generator")->required();
  pool->add_option("--atypical", pool_spec.atypical_total, "Atypical total");
  pool->add_option("--normal", pool_spec.normal_total, "Normal total");
  pool->add_option("--seed", seed_flag, "Seed");
  pool->add_option("--out", out_flag, "Output directory");

  // train
  auto* train = app.add_subcommand("train", "Run a k-fold classifier experiment");
  std::string train_config;
  train->add_option("--config", train_config, "Experiment config")->required();
  train->add_option("--seed", seed_flag, "Seed (overrides experiment.seed)");
  train->add_option("--out", out_flag, "Run directory (overrides experiment.output_dir)");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score a labeled manifest");
  std::vector<std::string> eval_runs, eval_ckpts;
  std::string eval_manifest, eval_tag = "final";
  double eval_threshold = 0.5;
  evaluate->add_option("--run", eval_runs, "Run directory (all folds, ensembled)");
  evaluate->add_option("--checkpoint", eval_ckpts, "Fold checkpoint");
  evaluate->add_option("--manifest", eval_manifest, "Labeled manifest")->required();
  evaluate->add_option("--tag", eval_tag, "final or preliminary");
  evaluate->add_option("--threshold", eval_threshold, "Decision threshold");
  evaluate->add_option("--out", out_flag, "Write metrics here instead of stdout");

  // compare
  auto* compare = app.add_subcommand("compare", "Compare two runs fold by fold (a - b)");
  std::string cmp_a, cmp_b;
  compare->add_option("--a", cmp_a, "First run directory")->required();
  compare->add_option("--b", cmp_b, "Second run directory")->required();
  compare->add_option("--out", out_flag, "Write here instead of stdout");

  // report
  auto* report = app.add_subcommand("report", "Fold table with mean and SD");
  std::vector<std::string> rep_runs, rep_labels, rep_summaries;
  std::string rep_metric = "auroc";
  report->add_option("--run", rep_runs, "Run directory (repeatable)");
  report->add_option("--summary", rep_summaries, "Summary CSV (repeatable)");
  report->add_option("--label", rep_labels, "Row labels, in order");
  report->add_option("--metric", rep_metric, "Metric for --run rows");
  report->add_option("--out", out_flag, "Write here instead of stdout");

  // package
  auto* package = app.add_subcommand("package", "Write the predictions file for an image directory");
  std::vector<std::string> pkg_runs, pkg_ckpts;
  std::string pkg_input;
  double pkg_threshold = 0.5;
  package->add_option("--run", pkg_runs, "Run directory (all folds, ensembled)");
  package->add_option("--checkpoint", pkg_ckpts, "Fold checkpoint");
  package->add_option("--input", pkg_input, "Directory of PNG patches")->required();
  package->add_option("--threshold", pkg_threshold, "Decision threshold");
  package->add_option("--out", out_flag, "Predictions file");

  // make-toy
  auto* make_toy = app.add_subcommand("make-toy", "Write the separable toy dataset");
  toy::ToySpec toy_spec;
  make_toy->add_option("--count", toy_spec.count, "Patch count");
  make_toy->add_option("--positive-fraction", toy_spec.positive_fraction, "Atypical fraction");
  make_toy->add_option("--seed", seed_flag, "Seed");
  make_toy->add_option("--out", out_flag, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*ingest) {
      emit(counts_text(dataset::load_manifest(ingest_manifest)), out_flag);
    } else if (*split) {
      const auto m = dataset::load_manifest(split_manifest);
      const auto seed = resolve_seed(seed_flag, 0);
      const auto plan = dataset::stratified_kfold(m, split_k, seed);
      const auto path = resolve_out(out_flag, "plan.csv");
      dataset::write_fold_plan(path, plan);
      std::cout << "wrote " << path.string() << " (k=" << split_k << ", seed=" << seed << ")\n";
    } else if (*tg) {
      const auto labeled = dataset::load_manifest(tg_manifest);
      const auto unlabeled = tg_unlabeled ? dataset::load_manifest(*tg_unlabeled) : labeled;
      const auto seed = resolve_seed(seed_flag, 0);
      const auto plan = dataset::read_fold_plan(tg_plan, seed);
      const auto config = orchestration::generator_profile(tg_profile, tg_config ? KvConfig::load(*tg_config) : KvConfig{});
      const auto dir = resolve_out(out_flag, "generators");
      orchestration::set_determinism(seed);
      const auto set = orchestration::train_generators(labeled, unlabeled, plan, config, seed, dir);
      std::cout << "wrote base + " << set.folds.size() << " fold generators to " << dir.string() << "\n";
    } else if (*sample) {
      const auto ck = generator::GeneratorCheckpoint::load(sample_ckpt);
      generator::Condition cls = generator::Condition::unconditional;
      if (sample_class == "atypical") {
        cls = generator::Condition::atypical;
      } else if (sample_class == "normal") {
        cls = generator::Condition::normal;
      } else if (sample_class != "unconditional") {
        throw ValidationError("--class must be normal, atypical or unconditional");
      }
      const auto seed = resolve_seed(seed_flag, 0);
      const auto dir = resolve_out(out_flag, "samples");
      const auto images = generator::sample_synthetic(ck, cls, sample_count, seed);
      for (std::size_t i = 0; i < images.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "%s_%06zu.png", sample_class.c_str(), i);
        write_png(dir / name, images[i]);
      }
      std::cout << "wrote " << images.size() << " images to " << dir.string() << "\n";
    } else if (*pool) {
      const auto folds = orchestration::load_fold_generators(pool_generators);
      pool_spec.folds = static_cast<int>(folds.size());
      const auto seed = resolve_seed(seed_flag, 0);
      const auto dir = resolve_out(out_flag, "pool");
      const auto manifest = generator::build_synth_pool(folds, pool_spec, seed, dir);
      std::cout << "wrote " << manifest.size() << " synthetic records to " << (dir / "manifest.csv").string() << "\n";
    } else if (*train) {
      const std::string text = read_file(train_config);
      KvConfig kv = KvConfig::parse(text);
      if (seed_flag || env(kEnvSeed)) kv.set("experiment.seed", std::to_string(resolve_seed(seed_flag, 0)));
      auto config = orchestration::ExperimentConfig::from_kv(kv, std::filesystem::path(train_config).parent_path());
      if (out_flag || env(kEnvOutput)) config.output_dir = resolve_out(out_flag, config.output_dir);
      const auto art = orchestration::run_cv_experiment(config, text);
      std::cout << orchestration::render_report({{config.name, art.summaries.at("auroc")}});
      std::cout << "run written to " << art.dir.string() << "\n";
    } else if (*evaluate) {
      const auto cks = collect_checkpoints(eval_runs, eval_ckpts);
      const auto result =
          orchestration::evaluate_checkpoints(cks, dataset::load_manifest(eval_manifest), eval_threshold, eval_tag);
      if (!result.note.empty()) std::cerr << "note: " << result.note << "\n";
      emit(result.to_kv().render(), out_flag);
    } else if (*compare) {
      const auto cmp = orchestration::compare_regimes(orchestration::RunArtifacts::load(cmp_a),
                                                      orchestration::RunArtifacts::load(cmp_b));
      emit(cmp.render(), out_flag);
    } else if (*report) {
      std::vector<std::pair<std::string, metrics::FoldSummary>> rows;
      for (const auto& run : rep_runs) {
        const auto art = orchestration::RunArtifacts::load(run);
        rows.emplace_back(art.snapshot.get_string("experiment.name"), art.summaries.at(rep_metric));
      }
      for (const auto& s : rep_summaries) {
        rows.emplace_back(std::filesystem::path(s).stem().string(), metrics::FoldSummary::from_csv(read_file(s)));
      }
      if (!rep_labels.empty()) {
        if (rep_labels.size() != rows.size()) throw ValidationError("--label count must match the rows");
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i].first = rep_labels[i];
      }
      emit(orchestration::render_report(rows), out_flag);
    } else if (*package) {
      const auto cks = collect_checkpoints(pkg_runs, pkg_ckpts);
      const auto result = orchestration::package_submission(cks, pkg_input, pkg_threshold);
      const auto path = resolve_out(out_flag, "predictions.csv");
      orchestration::write_package(path, result);
      std::cout << "wrote " << result.rows.size() << " predictions (" << result.mode << ", " << cks.size()
                << " checkpoints) to " << path.string() << "\n";
      if (!result.errors.empty()) std::cerr << result.errors.size() << " images failed; see " << path.string() << ".errors.csv\n";
    } else if (*make_toy) {
      toy_spec.seed = resolve_seed(seed_flag, toy_spec.seed);
      const auto dir = resolve_out(out_flag, "toy");
      const auto m = toy::make_toy_dataset(dir, toy_spec);
      std::cout << "wrote " << m.size() << " patches to " << (dir / "manifest.csv").string() << "\n";
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
