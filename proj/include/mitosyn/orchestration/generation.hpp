#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mitosyn/dataset/folds.hpp"
#include "mitosyn/dataset/manifest.hpp"
#include "mitosyn/generator/generator.hpp"

namespace mitosyn::orchestration {

// "tiny" or "full", then any keys from `overrides` (GenStageConfig::to_kv names).
generator::GenStageConfig generator_profile(const std::string& name, const KvConfig& overrides = {});

struct GeneratorSet {
  generator::GeneratorCheckpoint base;
  std::vector<generator::GeneratorCheckpoint> folds;
};

// Pretrains on `unlabeled` (images only), fine-tunes one conditional model per
// fold of `plan` on `labeled`, and writes base.json, fold_<f>.json and
// fold_<f>.train_ids.txt under `out_dir`.
GeneratorSet train_generators(const dataset::Manifest& labeled, const dataset::Manifest& unlabeled,
                              const dataset::FoldPlan& plan, const generator::GenStageConfig& config,
                              std::uint64_t seed, const std::filesystem::path& out_dir);

// Loads fold_0.json .. fold_<k-1>.json from a generator directory.
std::vector<generator::GeneratorCheckpoint> load_fold_generators(const std::filesystem::path& dir);

// Throws unless every fold checkpoint's training ids avoid that fold's
// validation ids.
void audit_fold_disjointness(const std::vector<generator::GeneratorCheckpoint>& folds, const dataset::FoldPlan& plan);

}  // namespace mitosyn::orchestration
