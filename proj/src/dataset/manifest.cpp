#include "mitosyn/dataset/manifest.hpp"

#include <charconv>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "mitosyn/core/error.hpp"
#include "mitosyn/core/io.hpp"
#include "mitosyn/image/image.hpp"

namespace mitosyn::dataset {
namespace {

constexpr std::string_view kHeader = "id,path,label,domain,provenance,origin_fold";

int parse_label(const std::string& token, std::size_t line_no) {
  if (token == "normal") return kNormal;
  if (token == "atypical") return kAtypical;
  throw ValidationError("manifest line " + std::to_string(line_no) + ": unknown label token '" + token + "'");
}

Provenance parse_provenance(const std::string& token, std::size_t line_no) {
  if (token == "real") return Provenance::real;
  if (token == "synthetic") return Provenance::synthetic;
  throw ValidationError("manifest line " + std::to_string(line_no) + ": unknown provenance '" + token + "'");
}

}  // namespace

std::string_view to_string(Provenance p) { return p == Provenance::real ? "real" : "synthetic"; }

std::string_view label_token(int label) { return label == kAtypical ? "atypical" : "normal"; }

Manifest::Manifest(std::vector<PatchRecord> records) : records_(std::move(records)) {
  std::unordered_set<std::string> seen;
  seen.reserve(records_.size());
  for (const auto& r : records_) {
    if (r.id.empty()) throw ValidationError("record with empty id");
    if (!seen.insert(r.id).second) throw ValidationError("duplicate id '" + r.id + "'");
    if (r.label != kNormal && r.label != kAtypical) {
      throw ValidationError("record '" + r.id + "': label must be 0 or 1");
    }
    if (r.provenance == Provenance::synthetic) {
      if (!r.origin_fold) throw ValidationError("synthetic record '" + r.id + "' is missing origin_fold");
      if (*r.origin_fold < 0) throw ValidationError("synthetic record '" + r.id + "' has negative origin_fold");
    } else if (r.origin_fold) {
      throw ValidationError("real record '" + r.id + "' must not carry origin_fold");
    }
    ++counts_[slot(r.label, r.provenance)];
  }
}

std::size_t Manifest::count(int label, Provenance provenance) const { return counts_[slot(label, provenance)]; }

std::size_t Manifest::count_label(int label) const {
  return count(label, Provenance::real) + count(label, Provenance::synthetic);
}

std::size_t Manifest::count_provenance(Provenance provenance) const {
  return count(kNormal, provenance) + count(kAtypical, provenance);
}

bool Manifest::counts_consistent() const {
  std::array<std::size_t, 4> fresh{};
  for (const auto& r : records_) ++fresh[slot(r.label, r.provenance)];
  return fresh == counts_;
}

std::string Manifest::serialize() const {
  std::string out(kHeader);
  out += '\n';
  for (const auto& r : records_) {
    out += r.id;
    out += ',';
    out += r.image_ref.generic_string();
    out += ',';
    out += label_token(r.label);
    out += ',';
    out += r.domain;
    out += ',';
    out += to_string(r.provenance);
    out += ',';
    if (r.origin_fold) out += std::to_string(*r.origin_fold);
    out += '\n';
  }
  return out;
}

Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::vector<PatchRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != kHeader) {
        throw ValidationError("manifest header must be '" + std::string(kHeader) + "'");
      }
      header_seen = true;
      continue;
    }
    const auto fields = split_csv_line(line);
    if (fields.size() != 6) {
      throw ValidationError("manifest line " + std::to_string(line_no) + ": expected 6 fields, got " +
                            std::to_string(fields.size()));
    }
    PatchRecord r;
    r.id = fields[0];
    if (r.id.empty()) throw ValidationError("manifest line " + std::to_string(line_no) + ": empty id");
    if (fields[1].empty()) throw ValidationError("manifest line " + std::to_string(line_no) + ": empty path");
    std::filesystem::path p(fields[1]);
    r.image_ref = (p.is_relative() && !base_dir.empty()) ? (base_dir / p).lexically_normal() : p;
    r.label = parse_label(fields[2], line_no);
    r.domain = fields[3];
    r.provenance = parse_provenance(fields[4], line_no);
    if (!fields[5].empty()) {
      int fold = -1;
      auto [ptr, ec] = std::from_chars(fields[5].data(), fields[5].data() + fields[5].size(), fold);
      if (ec != std::errc() || ptr != fields[5].data() + fields[5].size() || fold < 0) {
        throw ValidationError("manifest line " + std::to_string(line_no) + ": bad origin_fold '" + fields[5] + "'");
      }
      r.origin_fold = fold;
    }
    if (r.provenance == Provenance::synthetic && !r.origin_fold) {
      throw ValidationError("manifest line " + std::to_string(line_no) + ": synthetic row without origin_fold");
    }
    records.push_back(std::move(r));
  }
  if (records.empty()) throw ValidationError("no records");
  return Manifest(std::move(records));
}

Manifest load_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("manifest not found: " + path.string());
  Manifest m = parse_manifest(read_file(path), path.parent_path());
  // Several rows may share a file; decode each distinct path once.
  std::unordered_set<std::string> checked;
  for (const auto& r : m.records()) {
    if (checked.insert(r.image_ref.string()).second) read_patch(r.image_ref);
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  const auto dir = std::filesystem::absolute(path).parent_path();
  std::vector<PatchRecord> rel;
  rel.reserve(manifest.size());
  for (auto r : manifest.records()) {
    const auto abs = std::filesystem::absolute(r.image_ref).lexically_normal();
    const auto candidate = abs.lexically_relative(dir);
    if (!candidate.empty() && *candidate.begin() != "..") r.image_ref = candidate;
    rel.push_back(std::move(r));
  }
  write_file_atomic(path, Manifest(std::move(rel)).serialize());
}

ClassCounts class_counts(const Manifest& set) {
  if (set.empty()) throw ValidationError("class_counts of an empty set");
  ClassCounts c;
  c.n_neg = set.count_label(kNormal);
  c.n_pos = set.count_label(kAtypical);
  c.prevalence = static_cast<double>(c.n_pos) / static_cast<double>(c.n_pos + c.n_neg);
  return c;
}

}  // namespace mitosyn::dataset
