#pragma once

#include <json.hpp>

#include "mitosyn/nn/layers.hpp"

namespace mitosyn::nn {

// {"name": {"rows": r, "cols": c, "data": [...]}}. Floats round-trip exactly.
nlohmann::json params_to_json(const NamedParams& params);

// Copies values into existing parameters; names and shapes must match exactly.
void load_params(const nlohmann::json& j, const NamedParams& params);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

}  // namespace mitosyn::nn
