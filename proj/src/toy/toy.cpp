#include "mitosyn/toy/toy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "mitosyn/core/error.hpp"

namespace mitosyn::toy {
namespace {

std::uint8_t clamp_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

// Per-domain stain tint (multiplicative, per channel).
std::array<double, 3> domain_tint(int domain) {
  const double a = 0.7 * domain;
  return {0.92 + 0.08 * std::sin(a), 0.90 + 0.08 * std::cos(1.3 * a), 0.93 + 0.07 * std::sin(2.1 * a + 1.0)};
}

}  // namespace

Image render_patch(int label, int domain, Rng& rng) {
  Image img(kPatchSide, kPatchSide);
  const auto tint = domain_tint(domain);
  const std::array<double, 3> background{232.0, 180.0, 210.0};
  const std::array<double, 3> figure = label == dataset::kAtypical ? std::array<double, 3>{60.0, 70.0, 190.0}
                                                                   : std::array<double, 3>{110.0, 40.0, 90.0};
  const double cx = 64.0 + rng.uniform(-6.0, 6.0);
  const double cy = 64.0 + rng.uniform(-6.0, 6.0);
  const double rx = rng.uniform(10.0, 18.0);
  const double ry = rng.uniform(10.0, 18.0);
  const double angle = rng.uniform(0.0, 3.14159265358979);
  const double ca = std::cos(angle), sa = std::sin(angle);
  for (int y = 0; y < kPatchSide; ++y) {
    for (int x = 0; x < kPatchSide; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double u = (dx * ca + dy * sa) / rx, v = (-dx * sa + dy * ca) / ry;
      const double inside = 1.0 / (1.0 + std::exp(8.0 * (u * u + v * v - 1.0)));
      const double grain = rng.normal() * 8.0;
      for (int c = 0; c < 3; ++c) {
        const double base = background[c] * (1.0 - inside) + figure[c] * inside;
        img.at(y, x, c) = clamp_u8(base * tint[c] + grain);
      }
    }
  }
  return img;
}

dataset::Manifest make_toy_dataset(const std::filesystem::path& out_dir, const ToySpec& spec) {
  if (spec.count == 0 || spec.domains <= 0 || spec.positive_fraction <= 0.0 || spec.positive_fraction >= 1.0) {
    throw ValidationError("toy dataset needs count > 0, domains > 0 and a fraction in (0, 1)");
  }
  const auto positives = static_cast<std::size_t>(std::llround(spec.positive_fraction * static_cast<double>(spec.count)));
  Rng rng(spec.seed);
  std::vector<dataset::PatchRecord> records;
  for (std::size_t i = 0; i < spec.count; ++i) {
    // Spread positives evenly through the listing.
    const int label = (i * positives) / spec.count != ((i + 1) * positives) / spec.count ? dataset::kAtypical
                                                                                          : dataset::kNormal;
    const int domain = static_cast<int>(i % static_cast<std::size_t>(spec.domains));
    char name[32];
    std::snprintf(name, sizeof(name), "toy_%04zu", i);
    const auto path = out_dir / "images" / (std::string(name) + ".png");
    write_png(path, render_patch(label, domain, rng));
    dataset::PatchRecord r;
    r.id = name;
    r.image_ref = path;
    r.label = label;
    r.domain = "domain_" + std::to_string(domain);
    records.push_back(std::move(r));
  }
  dataset::Manifest manifest(std::move(records));
  dataset::write_manifest(out_dir / "manifest.csv", manifest);
  return manifest;
}

}  // namespace mitosyn::toy
