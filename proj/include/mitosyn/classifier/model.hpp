#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mitosyn/core/kvconfig.hpp"
#include "mitosyn/image/image.hpp"
#include "mitosyn/nn/layers.hpp"
#include "mitosyn/transforms/transforms.hpp"

namespace mitosyn::classifier {

enum class Family { native128_conv, token224_cls };

std::string_view to_string(Family family);
Family parse_family(std::string_view token);
int input_side(Family family);

struct BackboneSpec {
  Family family = Family::native128_conv;
  int embedding_dim = 16;
  // "random" or a path to a backbone weight file.
  std::string weight_source = "random";

  int input_side() const { return classifier::input_side(family); }
  bool is_plugin() const { return weight_source != "random"; }
  void validate() const;
  KvConfig to_kv() const;
  static BackboneSpec from_kv(const KvConfig& kv);
};

// Stacks images into non-overlapping p x p patches, one row per patch
// (row-major patch order, then y, x, channel inside a patch).
nn::Matrix patchify(std::span<const FloatImage> images, int patch);

// Backbone + single-logit head. native128_conv is a strided patch stem
// followed by a pointwise residual MLP and global average pooling;
// token224_cls is a one-block vision transformer read out at its class token.
class Classifier {
 public:
  Classifier() = default;
  Classifier(const BackboneSpec& spec, Rng& rng);

  // Returns an n x 1 matrix of logits. Every image must be input_side square.
  nn::Var logits(std::span<const FloatImage> batch) const;
  // Backbone output before the head, n x embedding_dim.
  nn::Var embed(std::span<const FloatImage> batch) const;

  const BackboneSpec& spec() const { return spec_; }
  int input_side() const { return spec_.input_side(); }
  const transforms::NormStats& norm() const { return norm_; }
  void set_norm(const transforms::NormStats& norm) { norm_ = norm; }

  nn::NamedParams parameters() const;
  nn::NamedParams backbone_parameters() const;

 private:
  BackboneSpec spec_;
  transforms::NormStats norm_;
  int patch_ = 8;
  nn::Linear stem_;
  nn::LayerNorm stem_norm_;
  nn::LayerNorm mlp_norm_;
  nn::Linear fc1_, fc2_;
  nn::Var cls_;
  nn::Var pos_;
  nn::TransformerBlock block_;
  nn::LayerNorm final_norm_;
  nn::Linear head_;
};

// Builds a classifier. With a plugin weight source the backbone tensors and
// normalization statistics come from the file; the head is freshly initialized.
Classifier build_model(const BackboneSpec& spec, std::uint64_t seed);

// Writes the backbone of `model` in the plugin format read by build_model.
void save_backbone_plugin(const std::filesystem::path& path, const Classifier& model);

// Eval preprocessing for the model's family (resize + normalization).
FloatImage preprocess(const Classifier& model, const Image& image);

}  // namespace mitosyn::classifier
