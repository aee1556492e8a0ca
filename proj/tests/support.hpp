#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "mitosyn/dataset/manifest.hpp"
#include "mitosyn/image/image.hpp"
#include "mitosyn/toy/toy.hpp"

namespace mitosyn::fixtures {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("mitosyn_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Image solid(std::uint8_t r, std::uint8_t g, std::uint8_t b, int side = kPatchSide) {
  Image img(side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      img.at(y, x, 0) = r;
      img.at(y, x, 1) = g;
      img.at(y, x, 2) = b;
    }
  }
  return img;
}

inline dataset::Manifest small_toy(const std::filesystem::path& dir, std::size_t count, std::uint64_t seed = 11,
                                   double fraction = 0.3) {
  return toy::make_toy_dataset(dir, {count, fraction, 9, seed});
}

// In-memory real manifest with the given class sizes (images are not touched).
inline dataset::Manifest counted_manifest(std::size_t normals, std::size_t atypicals) {
  std::vector<dataset::PatchRecord> records;
  for (std::size_t i = 0; i < normals + atypicals; ++i) {
    dataset::PatchRecord r;
    r.id = "r" + std::to_string(i);
    r.image_ref = r.id + ".png";
    // Interleave the classes so that order does not line up with labels.
    r.label = (i * atypicals) / (normals + atypicals) != ((i + 1) * atypicals) / (normals + atypicals)
                  ? dataset::kAtypical
                  : dataset::kNormal;
    r.domain = "d" + std::to_string(i % 9);
    records.push_back(std::move(r));
  }
  return dataset::Manifest(std::move(records));
}

// Synthetic pool with `per_fold` atypical records for every fold in [0, k).
inline dataset::Manifest counted_pool(std::size_t per_fold, int k, std::size_t normals_per_fold = 0) {
  std::vector<dataset::PatchRecord> records;
  for (int f = 0; f < k; ++f) {
    for (std::size_t i = 0; i < per_fold + normals_per_fold; ++i) {
      dataset::PatchRecord r;
      r.id = "s" + std::to_string(f) + "_" + std::to_string(i);
      r.image_ref = r.id + ".png";
      r.label = i < per_fold ? dataset::kAtypical : dataset::kNormal;
      r.domain = "synthetic";
      r.provenance = dataset::Provenance::synthetic;
      r.origin_fold = f;
      records.push_back(std::move(r));
    }
  }
  return dataset::Manifest(std::move(records));
}

}  // namespace mitosyn::fixtures
