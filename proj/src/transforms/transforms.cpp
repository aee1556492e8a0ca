#include "mitosyn/transforms/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mitosyn/core/error.hpp"

namespace mitosyn::transforms {

void AugmentConfig::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(std::string("augment.") + name + " must be in [0, 1]");
  };
  auto nonneg = [](double v, const char* name) {
    if (!(v >= 0.0)) throw ValidationError(std::string("augment.") + name + " must be >= 0");
  };
  if (!(scale_range[0] > 0.0 && scale_range[0] <= scale_range[1])) {
    throw ValidationError("augment.scale_range must satisfy 0 < low <= high");
  }
  nonneg(max_rotation_deg, "max_rotation_deg");
  nonneg(translation_fraction, "translation_fraction");
  nonneg(jitter_brightness, "jitter_brightness");
  nonneg(jitter_contrast, "jitter_contrast");
  nonneg(jitter_saturation, "jitter_saturation");
  if (!(jitter_hue >= 0.0 && jitter_hue <= 0.5)) throw ValidationError("augment.jitter_hue must be in [0, 0.5]");
  nonneg(sharpness_factor, "sharpness_factor");
  prob(sharpness_probability, "sharpness_probability");
  prob(hflip_probability, "hflip_probability");
  prob(vflip_probability, "vflip_probability");
}

KvConfig AugmentConfig::to_kv() const {
  KvConfig kv;
  kv.set("scale_low", scale_range[0]);
  kv.set("scale_high", scale_range[1]);
  kv.set("max_rotation_deg", max_rotation_deg);
  kv.set("translation_fraction", translation_fraction);
  kv.set("jitter_brightness", jitter_brightness);
  kv.set("jitter_contrast", jitter_contrast);
  kv.set("jitter_saturation", jitter_saturation);
  kv.set("jitter_hue", jitter_hue);
  kv.set("sharpness_factor", sharpness_factor);
  kv.set("sharpness_probability", sharpness_probability);
  kv.set("hflip_probability", hflip_probability);
  kv.set("vflip_probability", vflip_probability);
  return kv;
}

AugmentConfig AugmentConfig::from_kv(const KvConfig& kv) {
  AugmentConfig c;
  c.scale_range[0] = kv.get_double("scale_low", c.scale_range[0]);
  c.scale_range[1] = kv.get_double("scale_high", c.scale_range[1]);
  c.max_rotation_deg = kv.get_double("max_rotation_deg", c.max_rotation_deg);
  c.translation_fraction = kv.get_double("translation_fraction", c.translation_fraction);
  c.jitter_brightness = kv.get_double("jitter_brightness", c.jitter_brightness);
  c.jitter_contrast = kv.get_double("jitter_contrast", c.jitter_contrast);
  c.jitter_saturation = kv.get_double("jitter_saturation", c.jitter_saturation);
  c.jitter_hue = kv.get_double("jitter_hue", c.jitter_hue);
  c.sharpness_factor = kv.get_double("sharpness_factor", c.sharpness_factor);
  c.sharpness_probability = kv.get_double("sharpness_probability", c.sharpness_probability);
  c.hflip_probability = kv.get_double("hflip_probability", c.hflip_probability);
  c.vflip_probability = kv.get_double("vflip_probability", c.vflip_probability);
  c.validate();
  return c;
}

AugmentConfig AugmentConfig::identity() {
  AugmentConfig c;
  c.scale_range = {1.0, 1.0};
  c.max_rotation_deg = 0.0;
  c.translation_fraction = 0.0;
  c.jitter_brightness = c.jitter_contrast = c.jitter_saturation = c.jitter_hue = 0.0;
  c.sharpness_probability = 0.0;
  c.hflip_probability = c.vflip_probability = 0.0;
  return c;
}

void NormStats::validate() const {
  for (float s : std) {
    if (!(s > 0.0f)) throw ValidationError("normalization std must be strictly positive");
  }
}

namespace detail {
namespace {

inline float clamp01(float v) { return std::min(1.0f, std::max(0.0f, v)); }

inline float gray(const float* px) { return 0.299f * px[0] + 0.587f * px[1] + 0.114f * px[2]; }

// Reflects a coordinate into [0, n-1] (edge sample not repeated).
inline double reflect(double x, int n) {
  if (n == 1) return 0.0;
  const double period = 2.0 * (n - 1);
  x = std::fmod(std::abs(x), period);
  return x > n - 1 ? period - x : x;
}

}  // namespace

FloatImage to_unit_float(const Image& image) {
  FloatImage out{image.width, image.height, std::vector<float>(image.pixels.size())};
  for (std::size_t i = 0; i < image.pixels.size(); ++i) out.values[i] = image.pixels[i] / 255.0f;
  return out;
}

Image from_unit_float(const FloatImage& image) {
  Image out(image.width, image.height);
  for (std::size_t i = 0; i < image.values.size(); ++i) {
    out.pixels[i] = static_cast<std::uint8_t>(std::lround(clamp01(image.values[i]) * 255.0f));
  }
  return out;
}

FloatImage affine(const FloatImage& image, const AffineParams& p) {
  const int w = image.width, h = image.height;
  FloatImage out{w, h, std::vector<float>(image.values.size())};
  const double theta = p.angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  const double cx = 0.5 * (w - 1), cy = 0.5 * (h - 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = x - cx - p.tx, dy = y - cy - p.ty;
      // Inverse of (rotate by theta, then scale): rotate by -theta, divide by scale.
      const double sx = reflect((c * dx + s * dy) / p.scale + cx, w);
      const double sy = reflect((-s * dx + c * dy) / p.scale + cy, h);
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const float ax = static_cast<float>(sx - x0), ay = static_cast<float>(sy - y0);
      float* dst = &out.values[(static_cast<std::size_t>(y) * w + x) * 3];
      for (int ch = 0; ch < 3; ++ch) {
        const float v00 = image.at(y0, x0, ch), v01 = image.at(y0, x1, ch);
        const float v10 = image.at(y1, x0, ch), v11 = image.at(y1, x1, ch);
        const float top = ax == 0.0f ? v00 : v00 + ax * (v01 - v00);
        const float bot = ax == 0.0f ? v10 : v10 + ax * (v11 - v10);
        dst[ch] = ay == 0.0f ? top : top + ay * (bot - top);
      }
    }
  }
  return out;
}

void adjust_brightness(FloatImage& image, double factor) {
  const float f = static_cast<float>(factor);
  for (float& v : image.values) v = clamp01(v * f);
}

void adjust_contrast(FloatImage& image, double factor) {
  double sum = 0.0;
  const std::size_t n = image.values.size() / 3;
  for (std::size_t i = 0; i < n; ++i) sum += gray(&image.values[i * 3]);
  const float mean = static_cast<float>(sum / static_cast<double>(n));
  const float f = static_cast<float>(factor);
  for (float& v : image.values) v = clamp01(f * v + (1.0f - f) * mean);
}

void adjust_saturation(FloatImage& image, double factor) {
  const float f = static_cast<float>(factor);
  const std::size_t n = image.values.size() / 3;
  for (std::size_t i = 0; i < n; ++i) {
    float* px = &image.values[i * 3];
    const float g = gray(px);
    for (int ch = 0; ch < 3; ++ch) px[ch] = clamp01(f * px[ch] + (1.0f - f) * g);
  }
}

void adjust_hue(FloatImage& image, double shift) {
  const std::size_t n = image.values.size() / 3;
  for (std::size_t i = 0; i < n; ++i) {
    float* px = &image.values[i * 3];
    const float r = px[0], g = px[1], b = px[2];
    const float maxc = std::max({r, g, b}), minc = std::min({r, g, b});
    const float delta = maxc - minc;
    if (delta <= 0.0f) continue;  // achromatic: hue undefined, unchanged
    float hue;
    if (maxc == r) {
      hue = std::fmod((g - b) / delta, 6.0f);
    } else if (maxc == g) {
      hue = (b - r) / delta + 2.0f;
    } else {
      hue = (r - g) / delta + 4.0f;
    }
    hue = hue / 6.0f + static_cast<float>(shift);
    hue -= std::floor(hue);
    const float sat = delta / maxc, val = maxc;
    const float h6 = hue * 6.0f;
    const int sector = static_cast<int>(h6) % 6;
    const float frac = h6 - std::floor(h6);
    const float p = val * (1.0f - sat), q = val * (1.0f - sat * frac), t = val * (1.0f - sat * (1.0f - frac));
    switch (sector) {
      case 0: px[0] = val, px[1] = t, px[2] = p; break;
      case 1: px[0] = q, px[1] = val, px[2] = p; break;
      case 2: px[0] = p, px[1] = val, px[2] = t; break;
      case 3: px[0] = p, px[1] = q, px[2] = val; break;
      case 4: px[0] = t, px[1] = p, px[2] = val; break;
      default: px[0] = val, px[1] = p, px[2] = q; break;
    }
  }
}

void adjust_sharpness(FloatImage& image, double factor) {
  const int w = image.width, h = image.height;
  if (w < 3 || h < 3) return;
  // Smoothed copy with kernel [[1,1,1],[1,5,1],[1,1,1]]/13; border pixels stay.
  std::vector<float> smooth = image.values;
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        float acc = 4.0f * image.at(y, x, ch);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) acc += image.at(y + dy, x + dx, ch);
        }
        smooth[(static_cast<std::size_t>(y) * w + x) * 3 + ch] = acc / 13.0f;
      }
    }
  }
  const float f = static_cast<float>(factor);
  for (std::size_t i = 0; i < image.values.size(); ++i) {
    image.values[i] = clamp01(smooth[i] + f * (image.values[i] - smooth[i]));
  }
}

void hflip(FloatImage& image) {
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width / 2; ++x) {
      float* a = &image.values[(static_cast<std::size_t>(y) * image.width + x) * 3];
      float* b = &image.values[(static_cast<std::size_t>(y) * image.width + (image.width - 1 - x)) * 3];
      std::swap_ranges(a, a + 3, b);
    }
  }
}

void vflip(FloatImage& image) {
  const std::size_t row = static_cast<std::size_t>(image.width) * 3;
  for (int y = 0; y < image.height / 2; ++y) {
    std::swap_ranges(image.values.begin() + y * row, image.values.begin() + (y + 1) * row,
                     image.values.begin() + (image.height - 1 - y) * row);
  }
}

}  // namespace detail

Image apply_train_augment(const Image& image, const AugmentConfig& config, Rng& rng) {
  using namespace detail;
  FloatImage work = to_unit_float(image);

  AffineParams ap;
  ap.angle_deg = config.max_rotation_deg > 0 ? rng.uniform(-config.max_rotation_deg, config.max_rotation_deg) : 0.0;
  ap.scale = config.scale_range[0] < config.scale_range[1] ? rng.uniform(config.scale_range[0], config.scale_range[1])
                                                           : config.scale_range[0];
  if (config.translation_fraction > 0) {
    ap.tx = rng.uniform(-config.translation_fraction, config.translation_fraction) * image.width;
    ap.ty = rng.uniform(-config.translation_fraction, config.translation_fraction) * image.height;
  }
  if (ap.angle_deg != 0.0 || ap.scale != 1.0 || ap.tx != 0.0 || ap.ty != 0.0) work = affine(work, ap);

  // Color jitter: the enabled adjustments run in a random order.
  struct Step {
    int kind;
    double amount;
  };
  std::vector<Step> steps;
  auto factor = [&rng](double spread) { return rng.uniform(std::max(0.0, 1.0 - spread), 1.0 + spread); };
  if (config.jitter_brightness > 0) steps.push_back({0, factor(config.jitter_brightness)});
  if (config.jitter_contrast > 0) steps.push_back({1, factor(config.jitter_contrast)});
  if (config.jitter_saturation > 0) steps.push_back({2, factor(config.jitter_saturation)});
  if (config.jitter_hue > 0) steps.push_back({3, rng.uniform(-config.jitter_hue, config.jitter_hue)});
  for (std::size_t i = steps.size(); i > 1; --i) std::swap(steps[i - 1], steps[rng.below(i)]);
  for (const auto& step : steps) {
    switch (step.kind) {
      case 0: adjust_brightness(work, step.amount); break;
      case 1: adjust_contrast(work, step.amount); break;
      case 2: adjust_saturation(work, step.amount); break;
      default: adjust_hue(work, step.amount); break;
    }
  }

  if (config.sharpness_probability > 0 && rng.bernoulli(config.sharpness_probability)) {
    adjust_sharpness(work, config.sharpness_factor);
  }
  if (config.hflip_probability > 0 && rng.bernoulli(config.hflip_probability)) hflip(work);
  if (config.vflip_probability > 0 && rng.bernoulli(config.vflip_probability)) vflip(work);
  return from_unit_float(work);
}

namespace {

template <typename Get, typename Put>
void resize_impl(int in_w, int in_h, int side, Interpolation mode, Get get, Put put) {
  const double sx = static_cast<double>(in_w) / side, sy = static_cast<double>(in_h) / side;
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      if (mode == Interpolation::nearest) {
        const int nx = std::min(in_w - 1, static_cast<int>(std::floor(x * sx)));
        const int ny = std::min(in_h - 1, static_cast<int>(std::floor(y * sy)));
        for (int ch = 0; ch < 3; ++ch) put(y, x, ch, static_cast<double>(get(ny, nx, ch)));
        continue;
      }
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(in_w - 1));
      const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(in_h - 1));
      const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
      const int x1 = std::min(x0 + 1, in_w - 1), y1 = std::min(y0 + 1, in_h - 1);
      const double ax = fx - x0, ay = fy - y0;
      for (int ch = 0; ch < 3; ++ch) {
        const double top = (1 - ax) * get(y0, x0, ch) + ax * get(y0, x1, ch);
        const double bot = (1 - ax) * get(y1, x0, ch) + ax * get(y1, x1, ch);
        put(y, x, ch, (1 - ay) * top + ay * bot);
      }
    }
  }
}

}  // namespace

Image resize(const Image& image, int side, Interpolation mode) {
  if (side <= 0) throw ValidationError("resize side must be positive");
  if (side == image.width && side == image.height) return image;
  Image out(side, side);
  resize_impl(
      image.width, image.height, side, mode, [&](int y, int x, int c) { return image.at(y, x, c); },
      [&](int y, int x, int c, double v) {
        out.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      });
  return out;
}

FloatImage resize(const FloatImage& image, int side, Interpolation mode) {
  if (side <= 0) throw ValidationError("resize side must be positive");
  if (side == image.width && side == image.height) return image;
  FloatImage out{side, side, std::vector<float>(static_cast<std::size_t>(side) * side * 3)};
  resize_impl(
      image.width, image.height, side, mode, [&](int y, int x, int c) { return image.at(y, x, c); },
      [&](int y, int x, int c, double v) {
        out.values[(static_cast<std::size_t>(y) * side + x) * 3 + c] = static_cast<float>(v);
      });
  return out;
}

FloatImage apply_eval_transform(const Image& image, int target_size, const NormStats& stats) {
  if (target_size <= 0) throw ValidationError("target size must be positive");
  stats.validate();
  FloatImage raw{image.width, image.height, std::vector<float>(image.pixels.size())};
  for (std::size_t i = 0; i < image.pixels.size(); ++i) raw.values[i] = static_cast<float>(image.pixels[i]);
  FloatImage out = resize(raw, target_size);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const std::size_t ch = i % 3;
    out.values[i] = (out.values[i] / 255.0f - stats.mean[ch]) / stats.std[ch];
  }
  return out;
}

}  // namespace mitosyn::transforms
