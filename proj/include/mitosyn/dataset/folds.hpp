#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mitosyn/dataset/manifest.hpp"

namespace mitosyn::dataset {

// Assignment of every real record to one of k folds.
class FoldPlan {
 public:
  FoldPlan() = default;
  FoldPlan(int k, std::uint64_t seed, std::vector<std::pair<std::string, int>> entries);

  int k() const { return k_; }
  std::uint64_t seed() const { return seed_; }
  // (id, fold) in manifest order.
  const std::vector<std::pair<std::string, int>>& entries() const { return entries_; }

  // Throws ValidationError for unknown ids.
  int fold_of(const std::string& id) const;
  bool contains(const std::string& id) const { return index_.count(id) > 0; }

  std::vector<std::string> ids_in_fold(int fold) const;

  // `id,fold` CSV.
  std::string serialize() const;

  bool operator==(const FoldPlan& other) const { return k_ == other.k_ && entries_ == other.entries_; }

 private:
  int k_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<std::pair<std::string, int>> entries_;
  std::unordered_map<std::string, int> index_;
};

// Label-stratified k-fold split. Each class is shuffled with a seeded
// Fisher-Yates permutation and dealt round-robin; the second class starts
// where the first one stopped so total fold sizes also differ by at most one.
FoldPlan stratified_kfold(const Manifest& manifest, int k, std::uint64_t seed);

void write_fold_plan(const std::filesystem::path& path, const FoldPlan& plan);
// The CSV does not carry the seed; the caller supplies the one it was made with.
FoldPlan read_fold_plan(const std::filesystem::path& path, std::uint64_t seed = 0);

// Throws unless every real record of `manifest` is assigned and fold indices are in range.
void check_plan_covers(const FoldPlan& plan, const Manifest& manifest);

}  // namespace mitosyn::dataset
