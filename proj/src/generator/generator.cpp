#include "mitosyn/generator/generator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>

#include "mitosyn/core/error.hpp"
#include "mitosyn/core/io.hpp"
#include "mitosyn/nn/optim.hpp"
#include "mitosyn/nn/serialize.hpp"

namespace mitosyn::generator {
namespace {

constexpr const char* kCheckpointFormat = "mitosyn-generator-checkpoint";
constexpr int kCheckpointVersion = 1;
constexpr std::size_t kEncodeChunk = 64;

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

nn::Matrix normal_matrix(nn::Index rows, nn::Index cols, Rng& rng) {
  nn::Matrix m(rows, cols);
  for (nn::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.normal());
  return m;
}

void put_stage(KvConfig& kv, const std::string& prefix, const StageSettings& s) {
  kv.set(prefix + ".vae_epochs", s.vae_epochs);
  kv.set(prefix + ".ddpm_epochs", s.ddpm_epochs);
  kv.set(prefix + ".batch_size", s.batch_size);
  kv.set(prefix + ".lr", s.lr);
  kv.set(prefix + ".weight_decay", s.weight_decay);
  kv.set(prefix + ".optimizer", std::string("adamw"));
}

StageSettings get_stage(const KvConfig& kv, const std::string& prefix, const StageSettings& d) {
  StageSettings s;
  s.vae_epochs = static_cast<int>(kv.get_int(prefix + ".vae_epochs", d.vae_epochs));
  s.ddpm_epochs = static_cast<int>(kv.get_int(prefix + ".ddpm_epochs", d.ddpm_epochs));
  s.batch_size = static_cast<int>(kv.get_int(prefix + ".batch_size", d.batch_size));
  s.lr = kv.get_double(prefix + ".lr", d.lr);
  s.weight_decay = kv.get_double(prefix + ".weight_decay", d.weight_decay);
  if (kv.get_string(prefix + ".optimizer", "adamw") != "adamw") {
    throw ValidationError(prefix + ".optimizer: only adamw is supported");
  }
  return s;
}

void check_stage(const StageSettings& s, const char* name) {
  if (s.vae_epochs < 0 || s.ddpm_epochs < 0 || s.batch_size <= 0 || !(s.lr > 0.0) || s.weight_decay < 0.0) {
    throw ValidationError(std::string("generator.") + name + ": epochs must be >= 0, batch and lr positive");
  }
}

// Encodes in chunks; returns the stacked latent means.
nn::Matrix encode_all(const LatentCodec& codec, std::span<const Image> images) {
  const int cells = codec.config().latent.cells();
  nn::Matrix out(static_cast<nn::Index>(images.size()) * cells, codec.config().latent.channels);
  for (std::size_t start = 0; start < images.size(); start += kEncodeChunk) {
    const std::size_t n = std::min(kEncodeChunk, images.size() - start);
    out.middleRows(static_cast<nn::Index>(start) * cells, static_cast<nn::Index>(n) * cells) =
        codec.encode_mean(images.subspan(start, n));
  }
  return out;
}

double unit_scale(const nn::Matrix& latents) {
  const double n = static_cast<double>(latents.size());
  const double mean = latents.cast<double>().sum() / n;
  const double var = (latents.cast<double>().array() - mean).square().sum() / n;
  return var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
}

nn::Matrix gather_samples(const nn::Matrix& latents, std::span<const std::size_t> which, int cells) {
  nn::Matrix out(static_cast<nn::Index>(which.size()) * cells, latents.cols());
  for (std::size_t i = 0; i < which.size(); ++i) {
    out.middleRows(static_cast<nn::Index>(i) * cells, cells) =
        latents.middleRows(static_cast<nn::Index>(which[i]) * cells, cells);
  }
  return out;
}

// Stage-specific training of an existing codec/denoiser pair.
void fit_stage(GeneratorCheckpoint& ck, std::span<const Image> images, const std::vector<Condition>& conditions,
               const StageSettings& stage, double kl_weight, std::uint64_t seed) {
  Rng vae_rng(derive_seed(seed, "vae"));
  ck.vae_losses = train_codec(ck.codec, images, stage.vae_epochs, stage.batch_size, stage.lr, stage.weight_decay,
                              kl_weight, vae_rng);
  const nn::Matrix latents = encode_all(ck.codec, images);
  ck.latent_scale = unit_scale(latents);
  Rng ddpm_rng(derive_seed(seed, "ddpm"));
  ck.ddpm_losses = train_denoiser(ck.denoiser, latents * static_cast<float>(ck.latent_scale), conditions, ck.schedule,
                                  stage.ddpm_epochs, stage.batch_size, stage.lr, stage.weight_decay, ddpm_rng);
}

}  // namespace

GenStageConfig GenStageConfig::full() { return GenStageConfig{}; }

GenStageConfig GenStageConfig::tiny() {
  GenStageConfig c;
  c.pretrain = {20, 40, 32, 2e-3, 0.01};
  c.finetune = {5, 60, 16, 2e-3, 0.01};
  c.schedule = {50, 2e-3, 0.3};
  c.codec.latent = {8, 4};
  c.codec.hidden = 32;
  c.denoiser.latent = c.codec.latent;
  c.denoiser.patch = 2;
  c.denoiser.width = 32;
  c.denoiser.depth = 1;
  c.denoiser.heads = 2;
  c.denoiser.mlp_ratio = 2;
  return c;
}

void GenStageConfig::validate() const {
  check_stage(pretrain, "pretrain");
  check_stage(finetune, "finetune");
  codec.validate();
  denoiser.validate();
  if (!(denoiser.latent == codec.latent)) throw ValidationError("denoiser and codec latent shapes differ");
  if (codec.image_side != kPatchSide) throw ValidationError("generator image side must be 128");
  if (!(kl_weight >= 0.0)) throw ValidationError("kl_weight must be >= 0");
  build_noise_schedule(schedule.steps, schedule.beta_start, schedule.beta_end);
}

KvConfig GenStageConfig::to_kv() const {
  KvConfig kv;
  put_stage(kv, "pretrain", pretrain);
  put_stage(kv, "finetune", finetune);
  kv.set("schedule.steps", schedule.steps);
  kv.set("schedule.beta_start", schedule.beta_start);
  kv.set("schedule.beta_end", schedule.beta_end);
  kv.set("image_side", codec.image_side);
  kv.set("latent.side", codec.latent.side);
  kv.set("latent.channels", codec.latent.channels);
  kv.set("codec.hidden", codec.hidden);
  kv.set("denoiser.patch", denoiser.patch);
  kv.set("denoiser.width", denoiser.width);
  kv.set("denoiser.depth", denoiser.depth);
  kv.set("denoiser.heads", denoiser.heads);
  kv.set("denoiser.mlp_ratio", denoiser.mlp_ratio);
  kv.set("kl_weight", kl_weight);
  return kv;
}

GenStageConfig GenStageConfig::from_kv(const KvConfig& kv) {
  const GenStageConfig d = full();
  GenStageConfig c;
  c.pretrain = get_stage(kv, "pretrain", d.pretrain);
  c.finetune = get_stage(kv, "finetune", d.finetune);
  c.schedule.steps = static_cast<int>(kv.get_int("schedule.steps", d.schedule.steps));
  c.schedule.beta_start = kv.get_double("schedule.beta_start", d.schedule.beta_start);
  c.schedule.beta_end = kv.get_double("schedule.beta_end", d.schedule.beta_end);
  c.codec.image_side = static_cast<int>(kv.get_int("image_side", d.codec.image_side));
  c.codec.latent.side = static_cast<int>(kv.get_int("latent.side", d.codec.latent.side));
  c.codec.latent.channels = static_cast<int>(kv.get_int("latent.channels", d.codec.latent.channels));
  c.codec.hidden = static_cast<int>(kv.get_int("codec.hidden", d.codec.hidden));
  c.denoiser.latent = c.codec.latent;
  c.denoiser.patch = static_cast<int>(kv.get_int("denoiser.patch", d.denoiser.patch));
  c.denoiser.width = static_cast<int>(kv.get_int("denoiser.width", d.denoiser.width));
  c.denoiser.depth = static_cast<int>(kv.get_int("denoiser.depth", d.denoiser.depth));
  c.denoiser.heads = static_cast<int>(kv.get_int("denoiser.heads", d.denoiser.heads));
  c.denoiser.mlp_ratio = static_cast<int>(kv.get_int("denoiser.mlp_ratio", d.denoiser.mlp_ratio));
  c.kl_weight = kv.get_double("kl_weight", d.kl_weight);
  c.validate();
  return c;
}

std::string GenStageConfig::fingerprint() const { return hex64(fnv1a64(to_kv().render())); }

void GeneratorCheckpoint::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["config"] = config.to_kv().render();
  j["fingerprint"] = config.fingerprint();
  j["conditional"] = conditional;
  j["fold"] = fold ? nlohmann::json(*fold) : nlohmann::json(nullptr);
  j["latent_scale"] = latent_scale;
  j["seed"] = seed;
  j["schedule"] = {{"steps", config.schedule.steps},
                   {"beta_start", config.schedule.beta_start},
                   {"beta_end", config.schedule.beta_end}};
  j["training_ids"] = training_ids;
  std::string joined;
  for (const auto& id : training_ids) joined += id + "\n";
  j["training_ids_digest"] = hex64(fnv1a64(joined));
  j["vae_losses"] = vae_losses;
  j["ddpm_losses"] = ddpm_losses;
  j["codec"] = nn::params_to_json(codec.parameters());
  j["denoiser"] = nn::params_to_json(denoiser.parameters());
  write_file_atomic(path, j.dump());
}

GeneratorCheckpoint GeneratorCheckpoint::load(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("unreadable generator checkpoint " + path.string() + ": " + e.what());
  }
  if (j.value("format", "") != kCheckpointFormat) throw ValidationError(path.string() + " is not a generator checkpoint");
  if (j.value("version", 0) != kCheckpointVersion) throw ValidationError("unsupported generator checkpoint version");
  GeneratorCheckpoint ck;
  ck.config = GenStageConfig::from_kv(KvConfig::parse(j.at("config").get<std::string>()));
  if (ck.config.fingerprint() != j.at("fingerprint").get<std::string>()) {
    throw ValidationError("generator checkpoint fingerprint mismatch");
  }
  Rng dummy(0);
  ck.codec = LatentCodec(ck.config.codec, dummy);
  ck.denoiser = Denoiser(ck.config.denoiser, dummy);
  nn::load_params(j.at("codec"), ck.codec.parameters());
  nn::load_params(j.at("denoiser"), ck.denoiser.parameters());
  ck.schedule = build_noise_schedule(ck.config.schedule.steps, ck.config.schedule.beta_start, ck.config.schedule.beta_end);
  ck.conditional = j.at("conditional").get<bool>();
  if (!j.at("fold").is_null()) ck.fold = j.at("fold").get<int>();
  ck.latent_scale = j.at("latent_scale").get<double>();
  ck.seed = j.at("seed").get<std::uint64_t>();
  ck.training_ids = j.at("training_ids").get<std::vector<std::string>>();
  ck.vae_losses = j.at("vae_losses").get<std::vector<double>>();
  ck.ddpm_losses = j.at("ddpm_losses").get<std::vector<double>>();
  return ck;
}

GeneratorCheckpoint GeneratorCheckpoint::clone() const {
  GeneratorCheckpoint ck = *this;
  Rng dummy(0);
  ck.codec = LatentCodec(config.codec, dummy);
  ck.denoiser = Denoiser(config.denoiser, dummy);
  nn::load_params(nn::params_to_json(codec.parameters()), ck.codec.parameters());
  nn::load_params(nn::params_to_json(denoiser.parameters()), ck.denoiser.parameters());
  return ck;
}

std::vector<Image> load_images(const dataset::Manifest& manifest) {
  std::vector<Image> images;
  images.reserve(manifest.size());
  for (const auto& r : manifest.records()) images.push_back(read_patch(r.image_ref));
  return images;
}

std::vector<double> train_codec(LatentCodec& codec, std::span<const Image> images, int epochs, int batch_size, double lr,
                                double weight_decay, double kl_weight, Rng& rng) {
  if (images.empty()) throw ValidationError("codec training needs images");
  nn::AdamW opt(codec.parameters(), {0.9, 0.999, 1e-8, weight_decay});
  std::vector<double> losses;
  std::vector<Image> batch;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto order = shuffled_indices(images.size(), rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
      const std::size_t n = std::min(static_cast<std::size_t>(batch_size), order.size() - start);
      batch.clear();
      for (std::size_t i = 0; i < n; ++i) batch.push_back(images[order[start + i]]);
      const nn::Matrix pixels = images_to_grid(batch);
      auto enc = codec.encode(pixels);
      nn::Var noise(normal_matrix(enc.mu.rows(), enc.mu.cols(), rng));
      nn::Var z = nn::add(enc.mu, nn::mul(nn::exp(nn::scale(enc.logvar, 0.5f)), noise));
      nn::Var loss = vae_loss(codec.decode(z), pixels, enc.mu, enc.logvar, kl_weight, n);
      if (!std::isfinite(loss.item())) throw RuntimeFailure("VAE loss diverged");
      loss.backward();
      opt.step(lr);
      opt.zero_grad();
      total += loss.item();
      ++batches;
    }
    losses.push_back(total / static_cast<double>(batches));
  }
  return losses;
}

double reconstruction_error(const LatentCodec& codec, std::span<const Image> images) {
  double se = 0.0, n = 0.0;
  for (std::size_t start = 0; start < images.size(); start += kEncodeChunk) {
    const auto chunk = images.subspan(start, std::min(kEncodeChunk, images.size() - start));
    const nn::Matrix pixels = images_to_grid(chunk);
    const nn::Matrix recon = codec.decode(codec.encode(pixels).mu).value();
    se += (recon - pixels).cast<double>().squaredNorm();
    n += static_cast<double>(pixels.size());
  }
  return se / n;
}

nn::Var ddpm_loss(const NoisePredictor& predictor, const nn::Matrix& z0, const std::vector<Condition>& conditions,
                  const NoiseSchedule& schedule, LatentShape shape, Rng& rng) {
  const auto batch = static_cast<nn::Index>(conditions.size());
  if (batch == 0) throw ValidationError("empty diffusion batch");
  if (z0.rows() != batch * shape.cells() || z0.cols() != shape.channels) {
    throw ValidationError("latent batch does not match the latent shape");
  }
  std::vector<int> steps(conditions.size());
  nn::Matrix eps = normal_matrix(z0.rows(), z0.cols(), rng);
  nn::Matrix z_t(z0.rows(), z0.cols());
  for (nn::Index b = 0; b < batch; ++b) {
    const int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(schedule.steps())));
    steps[static_cast<std::size_t>(b)] = t;
    z_t.middleRows(b * shape.cells(), shape.cells()) = forward_diffuse(
        z0.middleRows(b * shape.cells(), shape.cells()), t, eps.middleRows(b * shape.cells(), shape.cells()), schedule);
  }
  nn::Var prediction = predictor(z_t, steps, conditions);
  if (prediction.rows() != eps.rows() || prediction.cols() != eps.cols()) {
    throw ValidationError("denoiser output shape differs from the latent shape");
  }
  return nn::mse(prediction, eps);
}

nn::Var ddpm_training_step(const NoisePredictor& predictor, const LatentCodec& codec, std::span<const Image> batch,
                           std::span<const int> labels, const NoiseSchedule& schedule, double latent_scale, Rng& rng) {
  if (batch.empty()) throw ValidationError("empty diffusion batch");
  if (!labels.empty() && labels.size() != batch.size()) throw ValidationError("labels must match the batch");
  std::vector<Condition> conditions(batch.size(), Condition::unconditional);
  for (std::size_t i = 0; i < labels.size(); ++i) conditions[i] = condition_for_label(labels[i]);
  const nn::Matrix z0 = codec.encode_mean(batch) * static_cast<float>(latent_scale);
  return ddpm_loss(predictor, z0, conditions, schedule, codec.config().latent, rng);
}

std::vector<double> train_denoiser(Denoiser& denoiser, const nn::Matrix& latents,
                                   const std::vector<Condition>& conditions, const NoiseSchedule& schedule, int epochs,
                                   int batch_size, double lr, double weight_decay, Rng& rng) {
  const LatentShape shape = denoiser.config().latent;
  if (conditions.empty()) throw ValidationError("denoiser training needs samples");
  if (latents.rows() != static_cast<nn::Index>(conditions.size()) * shape.cells()) {
    throw ValidationError("latent stack does not match the number of conditions");
  }
  nn::AdamW opt(denoiser.parameters(), {0.9, 0.999, 1e-8, weight_decay});
  const auto predictor = denoiser.as_predictor();
  std::vector<double> losses;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto order = shuffled_indices(conditions.size(), rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
      const std::size_t n = std::min(static_cast<std::size_t>(batch_size), order.size() - start);
      const std::span<const std::size_t> which(order.data() + start, n);
      std::vector<Condition> batch_conditions;
      for (std::size_t i : which) batch_conditions.push_back(conditions[i]);
      nn::Var loss = ddpm_loss(predictor, gather_samples(latents, which, shape.cells()), batch_conditions, schedule,
                               shape, rng);
      if (!std::isfinite(loss.item())) throw RuntimeFailure("denoiser loss diverged");
      loss.backward();
      opt.step(lr);
      opt.zero_grad();
      total += loss.item();
      ++batches;
    }
    losses.push_back(total / static_cast<double>(batches));
  }
  return losses;
}

nn::Matrix sample_latents(const NoisePredictor& predictor, const NoiseSchedule& schedule, LatentShape shape,
                          const std::vector<Condition>& conditions, Rng& rng) {
  const auto batch = static_cast<nn::Index>(conditions.size());
  nn::Matrix z = normal_matrix(batch * shape.cells(), shape.channels, rng);
  for (int t = schedule.steps(); t >= 1; --t) {
    const std::vector<int> steps(conditions.size(), t);
    const nn::Matrix eps = predictor(z, steps, conditions).value();
    const double beta = schedule.beta_at(t);
    const double ab = schedule.alpha_bar_at(t);
    const auto coef = static_cast<float>(beta / std::sqrt(1.0 - ab));
    z = (z - coef * eps) / static_cast<float>(std::sqrt(schedule.alpha_at(t)));
    if (t > 1) {
      // Posterior variance beta_t * (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t).
      const double sigma = std::sqrt(beta * (1.0 - schedule.alpha_bar_at(t - 1)) / (1.0 - ab));
      z += static_cast<float>(sigma) * normal_matrix(z.rows(), z.cols(), rng);
    }
  }
  return z;
}

GeneratorCheckpoint pretrain_generator(const dataset::Manifest& unlabeled, const GenStageConfig& config,
                                       std::uint64_t seed) {
  config.validate();
  if (unlabeled.empty()) throw ValidationError("pretraining needs a non-empty manifest");
  const auto images = load_images(unlabeled);
  GeneratorCheckpoint ck;
  ck.config = config;
  Rng init(derive_seed(seed, "init"));
  ck.codec = LatentCodec(config.codec, init);
  ck.denoiser = Denoiser(config.denoiser, init);
  ck.schedule = build_noise_schedule(config.schedule.steps, config.schedule.beta_start, config.schedule.beta_end);
  ck.seed = seed;
  for (const auto& r : unlabeled.records()) ck.training_ids.push_back(r.id);
  const std::vector<Condition> conditions(images.size(), Condition::unconditional);
  fit_stage(ck, images, conditions, config.pretrain, config.kl_weight, derive_seed(seed, "pretrain"));
  return ck;
}

std::vector<GeneratorCheckpoint> finetune_generator(const dataset::Manifest& labeled, const dataset::FoldPlan& plan,
                                                    const GeneratorCheckpoint& base, const GenStageConfig& config,
                                                    std::uint64_t seed) {
  config.validate();
  if (labeled.count_provenance(dataset::Provenance::synthetic) > 0) {
    throw ValidationError("fine-tuning expects a real-only labeled manifest");
  }
  dataset::check_plan_covers(plan, labeled);
  if (!(base.config.codec.latent == config.codec.latent) || base.config.codec.hidden != config.codec.hidden ||
      base.config.denoiser.width != config.denoiser.width || base.config.denoiser.depth != config.denoiser.depth ||
      base.config.denoiser.heads != config.denoiser.heads || base.config.denoiser.patch != config.denoiser.patch ||
      base.config.denoiser.mlp_ratio != config.denoiser.mlp_ratio || base.config.schedule.steps != config.schedule.steps) {
    throw ValidationError("base checkpoint is not compatible with the fine-tune configuration");
  }
  const auto all_images = load_images(labeled);
  std::vector<GeneratorCheckpoint> out;
  for (int fold = 0; fold < plan.k(); ++fold) {
    GeneratorCheckpoint ck = base.clone();
    if (!base.conditional) ck.denoiser.init_class_rows_from_unconditional();
    ck.config = config;
    ck.conditional = true;
    ck.fold = fold;
    ck.seed = seed;
    ck.training_ids.clear();
    std::vector<Image> images;
    std::vector<Condition> conditions;
    for (std::size_t i = 0; i < labeled.size(); ++i) {
      const auto& r = labeled.records()[i];
      if (plan.fold_of(r.id) == fold) continue;
      ck.training_ids.push_back(r.id);
      images.push_back(all_images[i]);
      conditions.push_back(condition_for_label(r.label));
    }
    fit_stage(ck, images, conditions, config.finetune, config.kl_weight,
              derive_seed(seed, static_cast<std::uint64_t>(fold)));
    out.push_back(std::move(ck));
  }
  return out;
}

std::vector<Image> sample_synthetic(const GeneratorCheckpoint& checkpoint, Condition cls, std::size_t count,
                                    std::uint64_t seed) {
  if (cls != Condition::unconditional && !checkpoint.conditional) {
    throw ValidationError("unconditional checkpoint cannot sample class '" + std::string(to_string(cls)) + "'");
  }
  std::vector<Image> out;
  out.reserve(count);
  Rng rng(seed);
  const auto predictor = checkpoint.denoiser.as_predictor();
  for (std::size_t start = 0; start < count; start += kEncodeChunk) {
    const std::size_t n = std::min(kEncodeChunk, count - start);
    const nn::Matrix z = sample_latents(predictor, checkpoint.schedule, checkpoint.config.codec.latent,
                                        std::vector<Condition>(n, cls), rng);
    auto images = checkpoint.codec.decode_images(z / static_cast<float>(checkpoint.latent_scale));
    for (auto& img : images) out.push_back(std::move(img));
  }
  return out;
}

std::vector<std::size_t> SynthPoolSpec::quota(std::size_t total) const {
  if (folds <= 0) throw ValidationError("synthetic pool needs at least one fold");
  const auto k = static_cast<std::size_t>(folds);
  std::vector<std::size_t> q(k, total / k);
  for (std::size_t f = 0; f < total % k; ++f) ++q[f];
  return q;
}

dataset::Manifest build_synth_pool(const std::vector<GeneratorCheckpoint>& checkpoints, const SynthPoolSpec& spec,
                                   std::uint64_t seed, const std::filesystem::path& out_dir) {
  if (checkpoints.size() != static_cast<std::size_t>(spec.folds)) {
    throw ValidationError("synthetic pool needs exactly one checkpoint per fold");
  }
  std::vector<const GeneratorCheckpoint*> by_fold(checkpoints.size(), nullptr);
  for (const auto& ck : checkpoints) {
    if (!ck.conditional || !ck.fold || *ck.fold < 0 || *ck.fold >= spec.folds || by_fold[*ck.fold]) {
      throw ValidationError("synthetic pool needs conditional checkpoints tagged with distinct folds 0..k-1");
    }
    by_fold[*ck.fold] = &ck;
  }
  const auto atypical = spec.quota(spec.atypical_total);
  const auto normal = spec.quota(spec.normal_total);
  std::vector<dataset::PatchRecord> records;
  for (int fold = 0; fold < spec.folds; ++fold) {
    for (const auto& [cls, counts] : {std::pair{Condition::atypical, atypical}, std::pair{Condition::normal, normal}}) {
      const auto f = static_cast<std::size_t>(fold);
      const auto images = sample_synthetic(*by_fold[f], cls, counts[f],
                                           derive_seed(seed, f * 3 + static_cast<std::size_t>(cls)));
      for (std::size_t i = 0; i < images.size(); ++i) {
        char name[96];
        std::snprintf(name, sizeof(name), "synth_f%d_%s_%06zu", fold, std::string(to_string(cls)).c_str(), i);
        const auto path = out_dir / "images" / ("fold" + std::to_string(fold)) / (std::string(name) + ".png");
        write_png(path, images[i]);
        dataset::PatchRecord r;
        r.id = name;
        r.image_ref = path;
        r.label = cls == Condition::atypical ? dataset::kAtypical : dataset::kNormal;
        r.domain = "synthetic";
        r.provenance = dataset::Provenance::synthetic;
        r.origin_fold = fold;
        records.push_back(std::move(r));
      }
    }
  }
  dataset::Manifest pool(std::move(records));
  dataset::write_manifest(out_dir / "manifest.csv", pool);
  return pool;
}

}  // namespace mitosyn::generator
