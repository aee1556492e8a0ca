#include "mitosyn/nn/serialize.hpp"

#include "mitosyn/core/error.hpp"

namespace mitosyn::nn {

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<float> data(m.data(), m.data() + m.size());
  j["data"] = data;
  return j;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const Index rows = j.at("rows").get<Index>();
  const Index cols = j.at("cols").get<Index>();
  const auto data = j.at("data").get<std::vector<float>>();
  if (static_cast<Index>(data.size()) != rows * cols) throw ValidationError("matrix payload size mismatch");
  return Eigen::Map<const Matrix>(data.data(), rows, cols);
}

nlohmann::json params_to_json(const NamedParams& params) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, v] : params) j[name] = matrix_to_json(v.value());
  return j;
}

void load_params(const nlohmann::json& j, const NamedParams& params) {
  if (!j.is_object() || j.size() != params.size()) {
    throw ValidationError("weight set does not match the model (" + std::to_string(j.size()) + " tensors vs " +
                          std::to_string(params.size()) + ")");
  }
  for (const auto& [name, v] : params) {
    if (!j.contains(name)) throw ValidationError("weights are missing tensor '" + name + "'");
    Matrix m = matrix_from_json(j.at(name));
    if (m.rows() != v.rows() || m.cols() != v.cols()) {
      throw ValidationError("tensor '" + name + "' has the wrong shape");
    }
    Var handle = v;
    handle.mutable_value() = std::move(m);
  }
}

}  // namespace mitosyn::nn
