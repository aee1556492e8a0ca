#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "mitosyn/core/random.hpp"
#include "mitosyn/dataset/manifest.hpp"
#include "mitosyn/image/image.hpp"

namespace mitosyn::toy {

// Synthetic stand-in for the real patch corpus: a stained background with a
// dark figure in the middle. Atypical figures are drawn in a distinctly
// bluer hue, so the two classes are separable by color alone.
struct ToySpec {
  std::size_t count = 500;
  double positive_fraction = 0.15;
  int domains = 9;
  std::uint64_t seed = 2025;
};

Image render_patch(int label, int domain, Rng& rng);

// Writes PNGs under out_dir/images and the manifest to out_dir/manifest.csv.
dataset::Manifest make_toy_dataset(const std::filesystem::path& out_dir, const ToySpec& spec);

}  // namespace mitosyn::toy
