#include "mitosyn/orchestration/report.hpp"

#include <algorithm>
#include <cstdio>

#include "mitosyn/core/error.hpp"
#include "mitosyn/core/io.hpp"

namespace mitosyn::orchestration {
namespace {

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::vector<double> ensemble_scores(const std::vector<classifier::FoldCheckpoint>& checkpoints,
                                    std::span<const Image> images) {
  std::vector<std::vector<double>> lists;
  for (const auto& ck : checkpoints) lists.push_back(classifier::predict_proba(ck, images));
  return metrics::ensemble_average(lists);
}

void check_family(const std::vector<classifier::FoldCheckpoint>& checkpoints) {
  if (checkpoints.empty()) throw ValidationError("at least one checkpoint is required");
  for (const auto& ck : checkpoints) {
    if (ck.model.spec().family != checkpoints.front().model.spec().family) {
      throw ValidationError("checkpoints must share one backbone family");
    }
  }
}

}  // namespace

std::string render_report(const std::vector<std::pair<std::string, metrics::FoldSummary>>& rows) {
  if (rows.empty()) throw ValidationError("report needs at least one row");
  const std::size_t k = rows.front().second.values.size();
  std::size_t label_width = 5;
  for (const auto& [label, s] : rows) {
    if (s.values.size() != k) throw ValidationError("report rows have inconsistent fold counts");
    label_width = std::max(label_width, label.size());
  }
  constexpr std::size_t kCell = 7;
  constexpr std::size_t kMeanCell = 14;
  std::string out = pad_right("Model", label_width);
  for (std::size_t f = 1; f <= k; ++f) out += " " + pad_left("F" + std::to_string(f), kCell);
  // "±" is two bytes but one column wide.
  out += " " + pad_left("Mean \xC2\xB1 SD", kMeanCell + 1) + "\n";
  for (const auto& [label, s] : rows) {
    std::string line = pad_right(label, label_width);
    for (double v : s.values) line += " " + pad_left(metrics::format_fixed2(v), kCell);
    line += " " + pad_left(metrics::format_mean_sd(s), kMeanCell + 1);
    out += line + "\n";
  }
  return out;
}

std::string render_predictions(const std::vector<PredictionRow>& rows) {
  std::string out = "id,probability,label\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), ",%.6f,%d\n", r.probability, r.label);
    out += r.id + buf;
  }
  return out;
}

PackageResult package_submission(const std::vector<classifier::FoldCheckpoint>& checkpoints,
                                 const std::filesystem::path& input_dir, double threshold) {
  check_family(checkpoints);
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ValidationError("threshold must lie in [0, 1]");
  if (!std::filesystem::is_directory(input_dir)) throw ValidationError("not a directory: " + input_dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(input_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
  }
  if (files.empty()) throw ValidationError("no images in " + input_dir.string());
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.stem().string() < b.stem().string(); });

  PackageResult result;
  result.mode = checkpoints.size() == 1 ? "single" : "ensemble";
  for (const auto& path : files) {
    const std::string id = path.stem().string();
    Image image;
    try {
      image = read_patch(path);
    } catch (const std::exception& e) {
      result.errors.emplace_back(id, e.what());
      continue;
    }
    const double p = ensemble_scores(checkpoints, std::span<const Image>(&image, 1)).front();
    result.rows.push_back({id, p, p >= threshold ? 1 : 0});
  }
  return result;
}

void write_package(const std::filesystem::path& path, const PackageResult& result) {
  write_file_atomic(path, render_predictions(result.rows));
  const std::filesystem::path sidecar = path.string() + ".errors.csv";
  if (result.errors.empty()) {
    std::filesystem::remove(sidecar);
    return;
  }
  std::string text = "id,error\n";
  for (const auto& [id, message] : result.errors) {
    std::string clean = message;
    std::replace(clean.begin(), clean.end(), ',', ';');
    std::replace(clean.begin(), clean.end(), '\n', ' ');
    text += id + "," + clean + "\n";
  }
  write_file_atomic(sidecar, text);
}

KvConfig EvaluationResult::to_kv() const {
  KvConfig kv = report.to_kv();
  kv.set("mode", mode);
  kv.set("tag", tag);
  if (!note.empty()) kv.set("note", note);
  return kv;
}

EvaluationResult evaluate_checkpoints(const std::vector<classifier::FoldCheckpoint>& checkpoints,
                                      const dataset::Manifest& labeled, double threshold, const std::string& tag) {
  check_family(checkpoints);
  if (labeled.empty()) throw ValidationError("evaluation set is empty");
  PatchCache cache;
  std::vector<Image> images;
  metrics::ScoredSet set;
  for (const auto& r : labeled.records()) {
    images.push_back(cache.get(r.image_ref));
    set.labels.push_back(r.label);
  }
  set.probabilities = ensemble_scores(checkpoints, images);
  EvaluationResult result;
  result.report = metrics::evaluate(set, threshold);
  result.mode = checkpoints.size() == 1 ? "single" : "ensemble";
  result.tag = tag;
  if (tag == "preliminary") result.note = "preliminary test set: not predictive of final performance";
  return result;
}

}  // namespace mitosyn::orchestration
