#include "mitosyn/classifier/model.hpp"

#include <json.hpp>

#include "mitosyn/core/error.hpp"
#include "mitosyn/core/io.hpp"
#include "mitosyn/nn/serialize.hpp"

namespace mitosyn::classifier {
namespace {

constexpr const char* kPluginFormat = "mitosyn-backbone";
constexpr int kConvPatch = 8;
constexpr int kTokenPatch = 16;

}  // namespace

std::string_view to_string(Family family) {
  return family == Family::native128_conv ? "native128_conv" : "token224_cls";
}

Family parse_family(std::string_view token) {
  if (token == "native128_conv") return Family::native128_conv;
  if (token == "token224_cls") return Family::token224_cls;
  throw ValidationError("unknown backbone family '" + std::string(token) + "'");
}

int input_side(Family family) { return family == Family::native128_conv ? 128 : 224; }

void BackboneSpec::validate() const {
  if (embedding_dim < 2 || embedding_dim % 2 != 0) throw ValidationError("embedding_dim must be even and >= 2");
  if (weight_source.empty()) throw ValidationError("weight_source must be 'random' or a plugin path");
}

KvConfig BackboneSpec::to_kv() const {
  KvConfig kv;
  kv.set("family", std::string(to_string(family)));
  kv.set("embedding_dim", embedding_dim);
  kv.set("input_side", input_side());
  kv.set("weight_source", weight_source);
  return kv;
}

BackboneSpec BackboneSpec::from_kv(const KvConfig& kv) {
  BackboneSpec s;
  s.family = parse_family(kv.get_string("family", "native128_conv"));
  s.embedding_dim = static_cast<int>(kv.get_int("embedding_dim", s.embedding_dim));
  s.weight_source = kv.get_string("weight_source", "random");
  if (kv.has("input_side") && kv.get_int("input_side") != s.input_side()) {
    throw ValidationError("input side mismatch: family " + std::string(to_string(s.family)) + " uses " +
                          std::to_string(s.input_side()));
  }
  s.validate();
  return s;
}

nn::Matrix patchify(std::span<const FloatImage> images, int patch) {
  if (images.empty()) throw ValidationError("empty image batch");
  const int side = images.front().width;
  if (side % patch != 0) throw ValidationError("image side is not a multiple of the patch size");
  const int grid = side / patch;
  const int cols = patch * patch * 3;
  nn::Matrix out(static_cast<nn::Index>(images.size()) * grid * grid, cols);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const FloatImage& img = images[n];
    if (img.width != side || img.height != side) throw ValidationError("images in a batch must share one size");
    for (int gy = 0; gy < grid; ++gy) {
      for (int gx = 0; gx < grid; ++gx) {
        float* row = out.row(static_cast<nn::Index>(n) * grid * grid + gy * grid + gx).data();
        for (int y = 0; y < patch; ++y) {
          const float* src = img.values.data() + (static_cast<std::size_t>(gy * patch + y) * side + gx * patch) * 3;
          std::copy(src, src + patch * 3, row + y * patch * 3);
        }
      }
    }
  }
  return out;
}

Classifier::Classifier(const BackboneSpec& spec, Rng& rng) : spec_(spec) {
  spec_.validate();
  const int dim = spec_.embedding_dim;
  if (spec_.family == Family::native128_conv) {
    patch_ = kConvPatch;
    stem_ = nn::Linear(patch_ * patch_ * 3, dim, rng);
    stem_norm_ = nn::LayerNorm(dim);
    mlp_norm_ = nn::LayerNorm(dim);
    fc1_ = nn::Linear(dim, 2 * dim, rng);
    fc2_ = nn::Linear(2 * dim, dim, rng);
  } else {
    patch_ = kTokenPatch;
    const int tokens = (spec_.input_side() / patch_) * (spec_.input_side() / patch_);
    stem_ = nn::Linear(patch_ * patch_ * 3, dim, rng);
    cls_ = nn::Var::parameter(nn::random_normal(1, dim, 0.02f, rng));
    pos_ = nn::Var::parameter(nn::random_normal(tokens + 1, dim, 0.02f, rng));
    block_ = nn::TransformerBlock(dim, 2, 2, rng);
  }
  final_norm_ = nn::LayerNorm(dim);
  head_ = nn::Linear(dim, 1, rng);
}

nn::Var Classifier::embed(std::span<const FloatImage> batch) const {
  if (batch.empty()) throw ValidationError("empty image batch");
  for (const auto& img : batch) {
    if (img.width != input_side() || img.height != input_side()) {
      throw ValidationError("input side mismatch: " + std::string(to_string(spec_.family)) + " expects " +
                            std::to_string(input_side()) + "x" + std::to_string(input_side()) + ", got " +
                            std::to_string(img.width) + "x" + std::to_string(img.height));
    }
  }
  const nn::Index grid = input_side() / patch_;
  const nn::Index tokens = grid * grid;
  nn::Var x = stem_(nn::Var(patchify(batch, patch_)));
  if (spec_.family == Family::native128_conv) {
    x = stem_norm_(x);
    x = nn::add(x, fc2_(nn::gelu(fc1_(mlp_norm_(x)))));
    return final_norm_(nn::group_mean(x, tokens));
  }
  std::vector<nn::Var> parts;
  parts.reserve(batch.size() * 2);
  for (std::size_t n = 0; n < batch.size(); ++n) {
    parts.push_back(cls_);
    parts.push_back(nn::slice_rows(x, static_cast<nn::Index>(n) * tokens, tokens));
  }
  nn::Var seq = nn::add_tiled(nn::concat_rows(parts), pos_);
  seq = block_(seq, tokens + 1);
  std::vector<nn::Index> cls_rows;
  for (std::size_t n = 0; n < batch.size(); ++n) cls_rows.push_back(static_cast<nn::Index>(n) * (tokens + 1));
  return final_norm_(nn::gather_rows(seq, cls_rows));
}

nn::Var Classifier::logits(std::span<const FloatImage> batch) const { return head_(embed(batch)); }

nn::NamedParams Classifier::backbone_parameters() const {
  nn::NamedParams out;
  nn::append_params(out, "stem", stem_.parameters());
  if (spec_.family == Family::native128_conv) {
    nn::append_params(out, "stem_norm", stem_norm_.parameters());
    nn::append_params(out, "mlp_norm", mlp_norm_.parameters());
    nn::append_params(out, "fc1", fc1_.parameters());
    nn::append_params(out, "fc2", fc2_.parameters());
  } else {
    out.emplace_back("cls", cls_);
    out.emplace_back("pos", pos_);
    nn::append_params(out, "block", block_.parameters());
  }
  nn::append_params(out, "final_norm", final_norm_.parameters());
  return out;
}

nn::NamedParams Classifier::parameters() const {
  nn::NamedParams out;
  nn::append_params(out, "backbone", backbone_parameters());
  nn::append_params(out, "head", head_.parameters());
  return out;
}

Classifier build_model(const BackboneSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(derive_seed(seed, "classifier.init"));
  Classifier model(spec, rng);
  if (!spec.is_plugin()) return model;
  const std::filesystem::path path(spec.weight_source);
  if (!std::filesystem::is_regular_file(path)) {
    throw ValidationError("unresolvable plugin weights: " + spec.weight_source);
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("unreadable plugin weights " + spec.weight_source + ": " + e.what());
  }
  if (j.value("format", "") != kPluginFormat) throw ValidationError(spec.weight_source + " is not a backbone file");
  if (parse_family(j.at("family").get<std::string>()) != spec.family) {
    throw ValidationError("plugin family does not match the requested backbone");
  }
  if (j.at("embedding_dim").get<int>() != spec.embedding_dim) {
    throw ValidationError("plugin embedding_dim does not match the requested backbone");
  }
  nn::load_params(j.at("params"), model.backbone_parameters());
  if (j.contains("norm")) {
    transforms::NormStats stats;
    stats.mean = j.at("norm").at("mean").get<std::array<float, 3>>();
    stats.std = j.at("norm").at("std").get<std::array<float, 3>>();
    stats.validate();
    model.set_norm(stats);
  }
  return model;
}

void save_backbone_plugin(const std::filesystem::path& path, const Classifier& model) {
  nlohmann::json j;
  j["format"] = kPluginFormat;
  j["family"] = std::string(to_string(model.spec().family));
  j["embedding_dim"] = model.spec().embedding_dim;
  j["norm"] = {{"mean", model.norm().mean}, {"std", model.norm().std}};
  j["params"] = nn::params_to_json(model.backbone_parameters());
  write_file_atomic(path, j.dump());
}

FloatImage preprocess(const Classifier& model, const Image& image) {
  return transforms::apply_eval_transform(image, model.input_side(), model.norm());
}

}  // namespace mitosyn::classifier
