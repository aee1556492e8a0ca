#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mitosyn::dataset {

inline constexpr int kNormal = 0;
inline constexpr int kAtypical = 1;

enum class Provenance { real, synthetic };

std::string_view to_string(Provenance p);
std::string_view label_token(int label);

// One labeled crop. `origin_fold` is set only for synthetic records and names
// the fold whose generator produced it.
struct PatchRecord {
  std::string id;
  std::filesystem::path image_ref;
  int label = kNormal;
  std::string domain;
  Provenance provenance = Provenance::real;
  std::optional<int> origin_fold;

  bool operator==(const PatchRecord&) const = default;
};

// Ordered, immutable collection of records with cached per-(label, provenance)
// counts. Construction validates id uniqueness, label range and the
// synthetic => origin_fold rule.
class Manifest {
 public:
  Manifest() = default;
  explicit Manifest(std::vector<PatchRecord> records);

  const std::vector<PatchRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  std::size_t count(int label, Provenance provenance) const;
  std::size_t count_label(int label) const;
  std::size_t count_provenance(Provenance provenance) const;

  // Recomputes the counts from the records and compares with the cache.
  bool counts_consistent() const;

  // Canonical CSV text (the on-disk format, paths as stored).
  std::string serialize() const;

 private:
  static std::size_t slot(int label, Provenance p) { return static_cast<std::size_t>(label) * 2 + (p == Provenance::synthetic); }

  std::vector<PatchRecord> records_;
  std::array<std::size_t, 4> counts_{};
};

// Reads a manifest file. Relative image paths resolve against the manifest's
// directory. Every referenced image is decoded and checked to be 128x128x3.
Manifest load_manifest(const std::filesystem::path& path);

// Parses manifest text without touching images. `base_dir` resolves relative paths.
Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir = {});

// Writes the manifest; image paths under the manifest's directory are written relative.
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

struct ClassCounts {
  std::size_t n_neg = 0;
  std::size_t n_pos = 0;
  double prevalence = 0.0;
};

ClassCounts class_counts(const Manifest& set);

}  // namespace mitosyn::dataset
