#include "mitosyn/generator/denoiser.hpp"

#include "mitosyn/core/error.hpp"

namespace mitosyn::generator {

std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::normal: return "normal";
    case Condition::atypical: return "atypical";
    default: return "unconditional";
  }
}

Condition condition_for_label(int label) { return label == 1 ? Condition::atypical : Condition::normal; }

void DenoiserConfig::validate() const {
  if (patch <= 0 || latent.side % patch != 0) throw ValidationError("denoiser patch must divide the latent side");
  if (width <= 0 || depth <= 0 || heads <= 0 || mlp_ratio <= 0) throw ValidationError("denoiser sizes must be positive");
  if (width % heads != 0) throw ValidationError("denoiser heads must divide its width");
}

Denoiser::Denoiser(const DenoiserConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const nn::Index token_values = static_cast<nn::Index>(config_.patch) * config_.patch * config_.latent.channels;
  embed_ = nn::Linear(token_values, config_.width, rng);
  pos_ = nn::Var::parameter(nn::random_normal(config_.tokens(), config_.width, 0.02f, rng));
  time1_ = nn::Linear(config_.width, config_.width, rng);
  time2_ = nn::Linear(config_.width, config_.width, rng);
  class_table_ = nn::Var::parameter(nn::random_normal(3, config_.width, 0.02f, rng));
  for (int i = 0; i < config_.depth; ++i) blocks_.emplace_back(config_.width, config_.heads, config_.mlp_ratio, rng);
  final_norm_ = nn::LayerNorm(config_.width);
  // Shift/scale of the final norm from the conditioning vector, zero at init.
  modulation_ = nn::Linear(config_.width, 2 * config_.width, rng, 0.0f);
  // Zero output layer: an untrained model predicts zero noise.
  out_ = nn::Linear(config_.width, token_values, rng, 0.0f);
}

nn::Var Denoiser::operator()(const nn::Matrix& z_t, const std::vector<int>& steps,
                             const std::vector<Condition>& conditions) const {
  const auto batch = static_cast<nn::Index>(steps.size());
  if (conditions.size() != steps.size()) throw ValidationError("one condition per sample is required");
  if (z_t.cols() != config_.latent.channels || z_t.rows() != batch * config_.latent.cells()) {
    throw ValidationError("latent batch does not match the denoiser's latent shape");
  }
  const int side = config_.latent.side;
  nn::Var tokens = embed_(nn::Var(grid_to_tokens(z_t, side, config_.patch)));
  tokens = nn::add_tiled(tokens, pos_);

  std::vector<nn::Index> class_rows;
  class_rows.reserve(conditions.size());
  for (Condition c : conditions) class_rows.push_back(static_cast<nn::Index>(c));
  nn::Var t_emb = time2_(nn::silu(time1_(nn::Var(nn::sinusoidal_embedding(steps, config_.width)))));
  nn::Var cond = nn::add(t_emb, nn::gather_rows(class_table_, class_rows));
  tokens = nn::add_grouped(tokens, cond);

  for (const auto& block : blocks_) tokens = block(tokens, config_.tokens());

  std::vector<nn::Index> owner(static_cast<std::size_t>(batch * config_.tokens()));
  for (std::size_t i = 0; i < owner.size(); ++i) owner[i] = static_cast<nn::Index>(i) / config_.tokens();
  nn::Var mod = nn::gather_rows(modulation_(nn::silu(cond)), owner);
  nn::Var h = final_norm_(tokens);
  h = nn::add(h, nn::mul(h, nn::slice_cols(mod, 0, config_.width)));
  h = nn::add(h, nn::slice_cols(mod, config_.width, config_.width));
  return tokens_to_grid(out_(h), side, config_.patch);
}

NoisePredictor Denoiser::as_predictor() const {
  return [this](const nn::Matrix& z, const std::vector<int>& t, const std::vector<Condition>& c) {
    return (*this)(z, t, c);
  };
}

void Denoiser::init_class_rows_from_unconditional() {
  nn::Matrix& table = class_table_.mutable_value();
  const auto uncond = static_cast<nn::Index>(Condition::unconditional);
  table.row(static_cast<nn::Index>(Condition::normal)) = table.row(uncond);
  table.row(static_cast<nn::Index>(Condition::atypical)) = table.row(uncond);
}

nn::NamedParams Denoiser::parameters() const {
  nn::NamedParams out;
  nn::append_params(out, "embed", embed_.parameters());
  out.emplace_back("pos", pos_);
  nn::append_params(out, "time1", time1_.parameters());
  nn::append_params(out, "time2", time2_.parameters());
  out.emplace_back("class_table", class_table_);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    nn::append_params(out, "block" + std::to_string(i), blocks_[i].parameters());
  }
  nn::append_params(out, "final_norm", final_norm_.parameters());
  nn::append_params(out, "modulation", modulation_.parameters());
  nn::append_params(out, "out", out_.parameters());
  return out;
}

}  // namespace mitosyn::generator
