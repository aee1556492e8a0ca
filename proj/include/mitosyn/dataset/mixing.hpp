#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "mitosyn/dataset/folds.hpp"
#include "mitosyn/dataset/manifest.hpp"

namespace mitosyn::dataset {

enum class Regime { real_only, synth_balanced };

std::string_view to_string(Regime regime);
Regime parse_regime(std::string_view token);

struct MixPolicy {
  Regime regime = Regime::real_only;
  std::size_t synth_pos_per_fold = 7667;
  std::size_t synth_neg_per_fold = 0;
  // Seeds the draw of synthetic records for each fold.
  std::uint64_t seed = 0;
};

struct TrainingView {
  Manifest train;
  Manifest val;
};

// Validation = real records assigned to `fold`. Training = the other real
// records, followed (under synth_balanced) by synthetic records drawn from the
// pool entries whose origin_fold equals `fold`.
TrainingView training_view(const Manifest& manifest, const FoldPlan& plan, int fold, const MixPolicy& policy,
                           const Manifest& synth_pool);

}  // namespace mitosyn::dataset
