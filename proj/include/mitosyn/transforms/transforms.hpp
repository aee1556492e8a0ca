#pragma once

#include <array>

#include "mitosyn/core/kvconfig.hpp"
#include "mitosyn/core/random.hpp"
#include "mitosyn/image/image.hpp"

namespace mitosyn::transforms {

// Train-time augmentation parameters. Defaults are the production stack:
// affine (scale, translation, rotation), color jitter, sharpness, flips.
struct AugmentConfig {
  std::array<double, 2> scale_range{0.95, 1.25};
  double max_rotation_deg = 30.0;
  // Maximum shift along each axis as a fraction of the image side.
  double translation_fraction = 0.10;
  double jitter_brightness = 0.15;
  double jitter_contrast = 0.15;
  double jitter_saturation = 0.15;
  double jitter_hue = 0.05;
  double sharpness_factor = 0.25;
  double sharpness_probability = 0.5;
  double hflip_probability = 0.5;
  double vflip_probability = 0.5;

  // Throws ValidationError on out-of-range fields.
  void validate() const;

  // Every field is written explicitly (no hidden defaults).
  KvConfig to_kv() const;
  static AugmentConfig from_kv(const KvConfig& kv);

  // All-identity configuration.
  static AugmentConfig identity();
};

struct NormStats {
  std::array<float, 3> mean{0.485f, 0.456f, 0.406f};
  std::array<float, 3> std{0.229f, 0.224f, 0.225f};

  void validate() const;
  static NormStats imagenet() { return {}; }
};

enum class Interpolation { bilinear, nearest };

// Affine -> color jitter -> sharpness -> flips. All randomness comes from `rng`.
Image apply_train_augment(const Image& image, const AugmentConfig& config, Rng& rng);

// Square resize. Bilinear uses half-pixel centers with edge clamping.
Image resize(const Image& image, int side, Interpolation mode = Interpolation::bilinear);
FloatImage resize(const FloatImage& image, int side, Interpolation mode = Interpolation::bilinear);

// Resize then (x/255 - mean) / std per channel.
FloatImage apply_eval_transform(const Image& image, int target_size, const NormStats& stats);

// Individual augmentation steps, exposed for testing. Images are float RGB in [0, 1].
namespace detail {
struct AffineParams {
  double angle_deg = 0.0;
  double scale = 1.0;
  double tx = 0.0;
  double ty = 0.0;
};
FloatImage to_unit_float(const Image& image);
Image from_unit_float(const FloatImage& image);
FloatImage affine(const FloatImage& image, const AffineParams& params);
void adjust_brightness(FloatImage& image, double factor);
void adjust_contrast(FloatImage& image, double factor);
void adjust_saturation(FloatImage& image, double factor);
void adjust_hue(FloatImage& image, double shift);
void adjust_sharpness(FloatImage& image, double factor);
void hflip(FloatImage& image);
void vflip(FloatImage& image);
}  // namespace detail

}  // namespace mitosyn::transforms
