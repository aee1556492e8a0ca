#include "mitosyn/dataset/mixing.hpp"

#include <algorithm>
#include <string>

#include "mitosyn/core/error.hpp"
#include "mitosyn/core/random.hpp"

namespace mitosyn::dataset {
namespace {

// Deterministic draw of `count` indices out of `candidates`, returned in pool order.
std::vector<std::size_t> draw(std::vector<std::size_t> candidates, std::size_t count, Rng& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(candidates[i], candidates[i + rng.below(candidates.size() - i)]);
  }
  candidates.resize(count);
  std::sort(candidates.begin(), candidates.end());
  return candidates;
}

}  // namespace

std::string_view to_string(Regime regime) {
  return regime == Regime::real_only ? "real_only" : "synth_balanced";
}

Regime parse_regime(std::string_view token) {
  if (token == "real_only") return Regime::real_only;
  if (token == "synth_balanced") return Regime::synth_balanced;
  throw ValidationError("unknown regime '" + std::string(token) + "'");
}

TrainingView training_view(const Manifest& manifest, const FoldPlan& plan, int fold, const MixPolicy& policy,
                           const Manifest& synth_pool) {
  if (fold < 0 || fold >= plan.k()) {
    throw ValidationError("fold " + std::to_string(fold) + " out of range [0, " + std::to_string(plan.k()) + ")");
  }
  check_plan_covers(plan, manifest);

  std::vector<PatchRecord> train, val;
  for (const auto& r : manifest.records()) {
    if (r.provenance != Provenance::real) continue;
    (plan.fold_of(r.id) == fold ? val : train).push_back(r);
  }

  if (policy.regime == Regime::synth_balanced) {
    std::vector<std::size_t> pos, neg;
    const auto& pool = synth_pool.records();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const auto& r = pool[i];
      if (r.provenance != Provenance::synthetic) {
        throw ValidationError("synthetic pool contains real record '" + r.id + "'");
      }
      if (*r.origin_fold >= plan.k()) {
        throw ValidationError("origin_fold mismatch: record '" + r.id + "' has origin_fold " +
                              std::to_string(*r.origin_fold) + " but the plan has k=" + std::to_string(plan.k()));
      }
      if (*r.origin_fold != fold) continue;
      (r.label == kAtypical ? pos : neg).push_back(i);
    }
    if (pos.size() < policy.synth_pos_per_fold || neg.size() < policy.synth_neg_per_fold) {
      throw ValidationError("synthetic pool too small for fold " + std::to_string(fold) + ": need " +
                            std::to_string(policy.synth_pos_per_fold) + " positives and " +
                            std::to_string(policy.synth_neg_per_fold) + " negatives, have " +
                            std::to_string(pos.size()) + " and " + std::to_string(neg.size()));
    }
    Rng rng(derive_seed(policy.seed, static_cast<std::uint64_t>(fold)));
    auto chosen_pos = draw(std::move(pos), policy.synth_pos_per_fold, rng);
    auto chosen_neg = draw(std::move(neg), policy.synth_neg_per_fold, rng);
    std::vector<std::size_t> chosen;
    std::merge(chosen_pos.begin(), chosen_pos.end(), chosen_neg.begin(), chosen_neg.end(), std::back_inserter(chosen));
    for (std::size_t i : chosen) train.push_back(pool[i]);
  }
  return {Manifest(std::move(train)), Manifest(std::move(val))};
}

}  // namespace mitosyn::dataset
