#include "mitosyn/orchestration/generation.hpp"

#include <unordered_set>

#include "mitosyn/core/error.hpp"
#include "mitosyn/core/io.hpp"

namespace mitosyn::orchestration {

generator::GenStageConfig generator_profile(const std::string& name, const KvConfig& overrides) {
  generator::GenStageConfig base;
  if (name == "tiny") {
    base = generator::GenStageConfig::tiny();
  } else if (name == "full") {
    base = generator::GenStageConfig::full();
  } else {
    throw ValidationError("unknown generator profile '" + name + "' (tiny or full)");
  }
  KvConfig kv = base.to_kv();
  for (const auto& [key, value] : overrides.entries()) {
    if (!kv.has(key)) throw ValidationError("unknown generator key '" + key + "'");
    kv.set(key, value);
  }
  return generator::GenStageConfig::from_kv(kv);
}

GeneratorSet train_generators(const dataset::Manifest& labeled, const dataset::Manifest& unlabeled,
                              const dataset::FoldPlan& plan, const generator::GenStageConfig& config,
                              std::uint64_t seed, const std::filesystem::path& out_dir) {
  GeneratorSet set;
  set.base = generator::pretrain_generator(unlabeled, config, derive_seed(seed, "generator.pretrain"));
  set.base.save(out_dir / "base.json");
  set.folds = generator::finetune_generator(labeled, plan, set.base, config, derive_seed(seed, "generator.finetune"));
  audit_fold_disjointness(set.folds, plan);
  for (const auto& ck : set.folds) {
    const std::string stem = "fold_" + std::to_string(*ck.fold);
    ck.save(out_dir / (stem + ".json"));
    std::string ids;
    for (const auto& id : ck.training_ids) ids += id + "\n";
    write_file_atomic(out_dir / (stem + ".train_ids.txt"), ids);
  }
  return set;
}

std::vector<generator::GeneratorCheckpoint> load_fold_generators(const std::filesystem::path& dir) {
  std::vector<generator::GeneratorCheckpoint> out;
  for (int fold = 0;; ++fold) {
    const auto path = dir / ("fold_" + std::to_string(fold) + ".json");
    if (!std::filesystem::exists(path)) break;
    out.push_back(generator::GeneratorCheckpoint::load(path));
    if (out.back().fold != fold) throw ValidationError(path.string() + " is tagged with a different fold");
  }
  if (out.empty()) throw ValidationError("no fold generators in " + dir.string());
  return out;
}

void audit_fold_disjointness(const std::vector<generator::GeneratorCheckpoint>& folds, const dataset::FoldPlan& plan) {
  for (const auto& ck : folds) {
    if (!ck.fold) throw ValidationError("fold generator without a fold tag");
    const auto val = plan.ids_in_fold(*ck.fold);
    const std::unordered_set<std::string> held_out(val.begin(), val.end());
    for (const auto& id : ck.training_ids) {
      if (held_out.count(id)) {
        throw ValidationError("generator for fold " + std::to_string(*ck.fold) + " was trained on validation id " + id);
      }
    }
  }
}

}  // namespace mitosyn::orchestration
