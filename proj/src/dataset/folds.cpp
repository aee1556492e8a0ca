#include "mitosyn/dataset/folds.hpp"

#include <charconv>
#include <sstream>

#include "mitosyn/core/error.hpp"
#include "mitosyn/core/io.hpp"
#include "mitosyn/core/random.hpp"

namespace mitosyn::dataset {

FoldPlan::FoldPlan(int k, std::uint64_t seed, std::vector<std::pair<std::string, int>> entries)
    : k_(k), seed_(seed), entries_(std::move(entries)) {
  if (k_ < 2) throw ValidationError("fold count must be at least 2");
  index_.reserve(entries_.size());
  for (const auto& [id, fold] : entries_) {
    if (fold < 0 || fold >= k_) throw ValidationError("fold index out of range for '" + id + "'");
    if (!index_.emplace(id, fold).second) throw ValidationError("id '" + id + "' assigned twice in fold plan");
  }
}

int FoldPlan::fold_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ValidationError("id '" + id + "' is not in the fold plan");
  return it->second;
}

std::vector<std::string> FoldPlan::ids_in_fold(int fold) const {
  std::vector<std::string> out;
  for (const auto& [id, f] : entries_) {
    if (f == fold) out.push_back(id);
  }
  return out;
}

std::string FoldPlan::serialize() const {
  std::string out = "id,fold\n";
  for (const auto& [id, fold] : entries_) {
    out += id;
    out += ',';
    out += std::to_string(fold);
    out += '\n';
  }
  return out;
}

FoldPlan stratified_kfold(const Manifest& manifest, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("fold count must be at least 2");
  if (manifest.count_provenance(Provenance::synthetic) > 0) {
    throw ValidationError("fold planning expects a real-only manifest");
  }
  const auto& records = manifest.records();
  std::vector<int> fold_of(records.size(), -1);
  Rng rng(seed);
  int offset = 0;
  for (int label : {kAtypical, kNormal}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (records[i].label == label) members.push_back(i);
    }
    if (members.size() < static_cast<std::size_t>(k)) {
      throw ValidationError("class '" + std::string(label_token(label)) + "' has " + std::to_string(members.size()) +
                            " members, fewer than k=" + std::to_string(k));
    }
    for (std::size_t i = members.size(); i > 1; --i) {
      std::swap(members[i - 1], members[rng.below(i)]);
    }
    for (std::size_t pos = 0; pos < members.size(); ++pos) {
      fold_of[members[pos]] = static_cast<int>((offset + pos) % static_cast<std::size_t>(k));
    }
    offset = static_cast<int>((offset + members.size()) % static_cast<std::size_t>(k));
  }
  std::vector<std::pair<std::string, int>> entries;
  entries.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) entries.emplace_back(records[i].id, fold_of[i]);
  return FoldPlan(k, seed, std::move(entries));
}

void write_fold_plan(const std::filesystem::path& path, const FoldPlan& plan) {
  write_file_atomic(path, plan.serialize());
}

FoldPlan read_fold_plan(const std::filesystem::path& path, std::uint64_t seed) {
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "id,fold") throw ValidationError("fold plan header must be 'id,fold'");
  std::vector<std::pair<std::string, int>> entries;
  int max_fold = -1;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    int fold = -1;
    if (fields.size() != 2) throw ValidationError("fold plan line " + std::to_string(line_no) + ": expected 2 fields");
    auto [ptr, ec] = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), fold);
    if (ec != std::errc() || ptr != fields[1].data() + fields[1].size() || fold < 0) {
      throw ValidationError("fold plan line " + std::to_string(line_no) + ": bad fold '" + fields[1] + "'");
    }
    max_fold = std::max(max_fold, fold);
    entries.emplace_back(fields[0], fold);
  }
  if (entries.empty()) throw ValidationError("fold plan is empty");
  return FoldPlan(max_fold + 1, seed, std::move(entries));
}

void check_plan_covers(const FoldPlan& plan, const Manifest& manifest) {
  std::size_t real = 0;
  for (const auto& r : manifest.records()) {
    if (r.provenance != Provenance::real) continue;
    ++real;
    if (!plan.contains(r.id)) throw ValidationError("fold plan inconsistent with manifest: '" + r.id + "' unassigned");
  }
  if (real != plan.entries().size()) {
    throw ValidationError("fold plan inconsistent with manifest: plan has " + std::to_string(plan.entries().size()) +
                          " ids, manifest has " + std::to_string(real) + " real records");
  }
}

}  // namespace mitosyn::dataset
