#include "mitosyn/classifier/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <sstream>

#include "mitosyn/classifier/loss.hpp"
#include "mitosyn/core/error.hpp"
#include "mitosyn/core/io.hpp"
#include "mitosyn/metrics/metrics.hpp"
#include "mitosyn/nn/optim.hpp"
#include "mitosyn/nn/serialize.hpp"

namespace mitosyn::classifier {
namespace {

constexpr const char* kCheckpointFormat = "mitosyn-fold-checkpoint";
constexpr int kCheckpointVersion = 1;
constexpr std::size_t kInferenceChunk = 64;

std::vector<double> logits_of(const Classifier& model, std::span<const FloatImage> inputs) {
  std::vector<double> out;
  out.reserve(inputs.size());
  for (std::size_t start = 0; start < inputs.size(); start += kInferenceChunk) {
    const auto chunk = inputs.subspan(start, std::min(kInferenceChunk, inputs.size() - start));
    const nn::Matrix z = model.logits(chunk).value();
    for (nn::Index i = 0; i < z.rows(); ++i) out.push_back(z(i, 0));
  }
  return out;
}

std::vector<double> to_probabilities(const std::vector<double>& logits) {
  std::vector<double> p(logits.size());
  std::transform(logits.begin(), logits.end(), p.begin(), sigmoid);
  return p;
}

std::vector<nn::Matrix> snapshot(const nn::NamedParams& params) {
  std::vector<nn::Matrix> out;
  for (const auto& [name, v] : params) out.push_back(v.value());
  return out;
}

void restore(const nn::NamedParams& params, const std::vector<nn::Matrix>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    nn::Var handle = params[i].second;
    handle.mutable_value() = values[i];
  }
}

}  // namespace

TrainConfig TrainConfig::for_family(Family family) {
  TrainConfig c;
  c.base_lr = family == Family::native128_conv ? 1e-4 : 1e-5;
  return c;
}

void TrainConfig::validate() const {
  if (batch_size <= 0 || epochs <= 0) throw ValidationError("train.batch_size and train.epochs must be positive");
  if (!(period > 0.0)) throw ValidationError("train.period must be positive");
  if (!(floor_lr >= 0.0) || !(base_lr > floor_lr)) throw ValidationError("train.base_lr must exceed train.floor_lr >= 0");
  if (patience < 0) throw ValidationError("train.patience must be >= 0");
}

KvConfig TrainConfig::to_kv() const {
  KvConfig kv;
  kv.set("batch_size", batch_size);
  kv.set("epochs", epochs);
  kv.set("base_lr", base_lr);
  kv.set("period", period);
  kv.set("floor_lr", floor_lr);
  kv.set("patience", patience);
  kv.set("optimizer", std::string("nadam"));
  kv.set("loss", std::string("bce"));
  kv.set("selection_metric", std::string("auroc"));
  return kv;
}

TrainConfig TrainConfig::from_kv(const KvConfig& kv, Family family) {
  TrainConfig c = for_family(family);
  c.batch_size = static_cast<int>(kv.get_int("batch_size", c.batch_size));
  c.epochs = static_cast<int>(kv.get_int("epochs", c.epochs));
  c.base_lr = kv.get_double("base_lr", c.base_lr);
  c.period = kv.get_double("period", c.period);
  c.floor_lr = kv.get_double("floor_lr", c.floor_lr);
  c.patience = static_cast<int>(kv.get_int("patience", c.patience));
  if (kv.get_string("optimizer", "nadam") != "nadam") throw ValidationError("train.optimizer: only nadam is supported");
  if (kv.get_string("loss", "bce") != "bce") throw ValidationError("train.loss: only bce is supported");
  if (kv.get_string("selection_metric", "auroc") != "auroc") {
    throw ValidationError("train.selection_metric: only auroc is supported");
  }
  c.validate();
  return c;
}

std::string render_run_log(const std::vector<EpochLog>& log) {
  std::string out = "epoch,train_loss,lr,val_auroc\n";
  char line[160];
  for (const auto& e : log) {
    std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.9g\n", e.epoch, e.train_loss, e.lr, e.val_auroc);
    out += line;
  }
  return out;
}

std::vector<EpochLog> parse_run_log(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "epoch,train_loss,lr,val_auroc") throw ValidationError("bad run log header");
  std::vector<EpochLog> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 4) throw ValidationError("bad run log row: " + line);
    try {
      out.push_back({std::stoi(f[0]), std::stod(f[1]), std::stod(f[2]), std::stod(f[3])});
    } catch (const std::exception&) {
      throw ValidationError("bad run log row: " + line);
    }
  }
  return out;
}

std::size_t select_best_epoch(const std::vector<EpochLog>& log) {
  if (log.empty()) throw ValidationError("empty run log");
  std::size_t best = 0;
  for (std::size_t i = 1; i < log.size(); ++i) {
    if (log[i].val_auroc > log[best].val_auroc) best = i;
  }
  return best;
}

std::string training_fingerprint(const BackboneSpec& spec, const TrainConfig& config,
                                 const transforms::AugmentConfig& augment) {
  KvConfig kv;
  kv.merge("model", spec.to_kv());
  kv.merge("train", config.to_kv());
  kv.merge("augment", augment.to_kv());
  return hex64(fnv1a64(kv.render()));
}

void FoldCheckpoint::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["backbone"] = model.spec().to_kv().render();
  j["norm"] = {{"mean", model.norm().mean}, {"std", model.norm().std}};
  j["fold"] = fold ? nlohmann::json(*fold) : nlohmann::json(nullptr);
  j["selected_epoch"] = selected_epoch;
  j["val_auroc"] = val_auroc;
  j["config_fingerprint"] = config_fingerprint;
  j["seed"] = seed;
  j["log"] = render_run_log(log);
  j["params"] = nn::params_to_json(model.parameters());
  write_file_atomic(path, j.dump());
}

FoldCheckpoint FoldCheckpoint::load(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("unreadable checkpoint " + path.string() + ": " + e.what());
  }
  if (j.value("format", "") != kCheckpointFormat) throw ValidationError(path.string() + " is not a fold checkpoint");
  if (j.value("version", 0) != kCheckpointVersion) throw ValidationError("unsupported checkpoint version");
  FoldCheckpoint ck;
  const BackboneSpec spec = BackboneSpec::from_kv(KvConfig::parse(j.at("backbone").get<std::string>()));
  Rng dummy(0);
  ck.model = Classifier(spec, dummy);
  nn::load_params(j.at("params"), ck.model.parameters());
  transforms::NormStats stats;
  stats.mean = j.at("norm").at("mean").get<std::array<float, 3>>();
  stats.std = j.at("norm").at("std").get<std::array<float, 3>>();
  ck.model.set_norm(stats);
  if (!j.at("fold").is_null()) ck.fold = j.at("fold").get<int>();
  ck.selected_epoch = j.at("selected_epoch").get<int>();
  ck.val_auroc = j.at("val_auroc").get<double>();
  ck.config_fingerprint = j.at("config_fingerprint").get<std::string>();
  ck.seed = j.at("seed").get<std::uint64_t>();
  ck.log = parse_run_log(j.at("log").get<std::string>());
  return ck;
}

FoldCheckpoint train_fold(const dataset::Manifest& train, const dataset::Manifest& val, const BackboneSpec& spec,
                          const TrainConfig& config, const transforms::AugmentConfig& augment, std::uint64_t seed,
                          std::optional<int> fold, PatchCache* cache) {
  config.validate();
  augment.validate();
  if (train.empty()) throw ValidationError("empty training set");
  if (val.empty()) throw ValidationError("empty validation set");
  if (val.count_provenance(dataset::Provenance::synthetic) > 0) {
    throw ValidationError("validation set must be real-only");
  }
  if (val.count_label(dataset::kAtypical) == 0 || val.count_label(dataset::kNormal) == 0) {
    throw ValidationError("validation AUROC undefined: validation set has a single class");
  }

  PatchCache local;
  PatchCache& images = cache ? *cache : local;
  FoldCheckpoint ck;
  ck.model = build_model(spec, seed);
  ck.fold = fold;
  ck.seed = seed;
  ck.config_fingerprint = training_fingerprint(spec, config, augment);
  const Classifier& model = ck.model;

  std::vector<const Image*> train_images;
  std::vector<int> train_labels;
  for (const auto& r : train.records()) {
    train_images.push_back(&images.get(r.image_ref));
    train_labels.push_back(r.label);
  }
  std::vector<FloatImage> val_inputs;
  metrics::ScoredSet val_set;
  for (const auto& r : val.records()) {
    val_inputs.push_back(preprocess(model, images.get(r.image_ref)));
    val_set.labels.push_back(r.label);
  }

  const auto params = model.parameters();
  nn::NAdam optimizer(params);
  Rng order_rng(derive_seed(seed, "classifier.order"));
  Rng augment_rng(derive_seed(seed, "classifier.augment"));
  const std::size_t n = train_images.size();
  const auto batch = static_cast<std::size_t>(config.batch_size);
  const std::size_t iterations = (n + batch - 1) / batch;

  std::vector<nn::Matrix> best;
  int since_best = 0;
  std::vector<std::size_t> order(n);
  std::vector<FloatImage> inputs;
  std::vector<int> targets;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
    double loss_sum = 0.0;
    for (std::size_t it = 0; it < iterations; ++it) {
      const double position = epoch + static_cast<double>(it) / static_cast<double>(iterations);
      const double lr = cosine_restart_lr(position, config.base_lr, config.period, config.floor_lr);
      inputs.clear();
      targets.clear();
      for (std::size_t b = it * batch; b < std::min(n, (it + 1) * batch); ++b) {
        inputs.push_back(preprocess(model, transforms::apply_train_augment(*train_images[order[b]], augment, augment_rng)));
        targets.push_back(train_labels[order[b]]);
      }
      nn::Var loss = bce_with_logits_mean(model.logits(inputs), targets);
      if (!std::isfinite(loss.item())) throw RuntimeFailure("classifier loss diverged");
      loss.backward();
      optimizer.step(lr);
      optimizer.zero_grad();
      loss_sum += loss.item() * static_cast<double>(targets.size());
    }
    val_set.probabilities = to_probabilities(logits_of(model, val_inputs));
    EpochLog entry{epoch, loss_sum / static_cast<double>(n),
                   cosine_restart_lr(epoch, config.base_lr, config.period, config.floor_lr), metrics::auroc(val_set)};
    ck.log.push_back(entry);
    if (ck.log.size() == 1 || entry.val_auroc > ck.val_auroc) {
      ck.val_auroc = entry.val_auroc;
      ck.selected_epoch = epoch;
      best = snapshot(params);
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }
  restore(params, best);
  return ck;
}

std::vector<double> predict_logits(const Classifier& model, std::span<const Image> patches) {
  std::vector<FloatImage> inputs;
  inputs.reserve(patches.size());
  for (const auto& p : patches) {
    if (p.width != kPatchSide || p.height != kPatchSide) {
      throw ValidationError("preprocessing mismatch: expected 128x128 patches");
    }
    inputs.push_back(preprocess(model, p));
  }
  if (inputs.empty()) return {};
  return logits_of(model, inputs);
}

std::vector<double> predict_proba(const Classifier& model, std::span<const Image> patches) {
  return to_probabilities(predict_logits(model, patches));
}

}  // namespace mitosyn::classifier
