#include "mitosyn/nn/tensor.hpp"

#include <cmath>
#include <unordered_set>

#include "mitosyn/core/error.hpp"

namespace mitosyn::nn {
namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ValidationError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()) + ")");
  }
}

inline Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

}  // namespace

Var::Var(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var Var::from_op(Matrix value, std::vector<Var> parents, std::function<void(Node&)> backward) {
  Var out(std::move(value), false);
  for (const auto& p : parents) {
    if (p.requires_grad()) {
      out.node_->requires_grad = true;
      break;
    }
  }
  if (out.node_->requires_grad) {
    out.node_->parents.reserve(parents.size());
    for (auto& p : parents) out.node_->parents.push_back(p.node_);
    out.node_->backward = std::move(backward);
  }
  return out;
}

void Var::backward() const {
  if (rows() != 1 || cols() != 1) throw ValidationError("backward() needs a scalar");
  if (!requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  node_->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw ValidationError("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                          std::to_string(b.rows()) + ")");
  }
  Matrix out = a.value() * b.value();
  return Var::from_op(std::move(out), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) pa.accumulate(self.grad * pb.value.transpose());
    if (pb.requires_grad) pb.accumulate(pa.value.transpose() * self.grad);
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return Var::from_op(a.value() + b.value(), {a, b}, [](Node& self) {
    for (std::size_t i = 0; i < 2; ++i) {
      if (parent(self, i).requires_grad) parent(self, i).accumulate(self.grad);
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return Var::from_op(a.value() - b.value(), {a, b}, [](Node& self) {
    if (parent(self, 0).requires_grad) parent(self, 0).accumulate(self.grad);
    if (parent(self, 1).requires_grad) parent(self, 1).accumulate(-self.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  return Var::from_op(a.value().cwiseProduct(b.value()), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) pa.accumulate(self.grad.cwiseProduct(pb.value));
    if (pb.requires_grad) pb.accumulate(self.grad.cwiseProduct(pa.value));
  });
}

Var scale(const Var& a, float s) {
  return Var::from_op(a.value() * s, {a}, [s](Node& self) { parent(self, 0).accumulate(self.grad * s); });
}

Var transpose(const Var& a) {
  return Var::from_op(a.value().transpose(), {a},
                      [](Node& self) { parent(self, 0).accumulate(self.grad.transpose()); });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ValidationError("add_row: row shape mismatch");
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return Var::from_op(std::move(out), {a, row}, [](Node& self) {
    if (parent(self, 0).requires_grad) parent(self, 0).accumulate(self.grad);
    if (parent(self, 1).requires_grad) parent(self, 1).accumulate(self.grad.colwise().sum());
  });
}

Var mul_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ValidationError("mul_row: row shape mismatch");
  Matrix out = a.value().array().rowwise() * row.value().row(0).array();
  return Var::from_op(std::move(out), {a, row}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pr = parent(self, 1);
    if (pa.requires_grad) {
      Matrix g = self.grad.array().rowwise() * pr.value.row(0).array();
      pa.accumulate(g);
    }
    if (pr.requires_grad) pr.accumulate(self.grad.cwiseProduct(pa.value).colwise().sum());
  });
}

Var add_tiled(const Var& a, const Var& b) {
  const Index r = b.rows();
  if (b.cols() != a.cols() || r == 0 || a.rows() % r != 0) throw ValidationError("add_tiled: shape mismatch");
  Matrix out = a.value();
  for (Index i = 0; i < out.rows(); i += r) out.middleRows(i, r) += b.value();
  return Var::from_op(std::move(out), {a, b}, [r](Node& self) {
    if (parent(self, 0).requires_grad) parent(self, 0).accumulate(self.grad);
    if (parent(self, 1).requires_grad) {
      Matrix g = Matrix::Zero(r, self.grad.cols());
      for (Index i = 0; i < self.grad.rows(); i += r) g += self.grad.middleRows(i, r);
      parent(self, 1).accumulate(g);
    }
  });
}

Var add_grouped(const Var& a, const Var& b) {
  const Index m = b.rows();
  if (b.cols() != a.cols() || m == 0 || a.rows() % m != 0) throw ValidationError("add_grouped: shape mismatch");
  const Index group = a.rows() / m;
  Matrix out = a.value();
  for (Index j = 0; j < m; ++j) out.middleRows(j * group, group).rowwise() += b.value().row(j);
  return Var::from_op(std::move(out), {a, b}, [m, group](Node& self) {
    if (parent(self, 0).requires_grad) parent(self, 0).accumulate(self.grad);
    if (parent(self, 1).requires_grad) {
      Matrix g(m, self.grad.cols());
      for (Index j = 0; j < m; ++j) g.row(j) = self.grad.middleRows(j * group, group).colwise().sum();
      parent(self, 1).accumulate(g);
    }
  });
}

Var relu(const Var& a) {
  return Var::from_op(a.value().cwiseMax(0.0f), {a}, [](Node& self) {
    Node& p = parent(self, 0);
    p.accumulate((p.value.array() > 0.0f).select(self.grad, 0.0f));
  });
}

Var gelu(const Var& a) {
  // tanh approximation
  constexpr float k = 0.7978845608028654f;  // sqrt(2/pi)
  constexpr float c = 0.044715f;
  Matrix out = a.value().unaryExpr([](float x) { return 0.5f * x * (1.0f + std::tanh(k * (x + c * x * x * x))); });
  return Var::from_op(std::move(out), {a}, [](Node& self) {
    Node& p = parent(self, 0);
    Matrix d = p.value.unaryExpr([](float x) {
      const float u = k * (x + c * x * x * x);
      const float t = std::tanh(u);
      return 0.5f * (1.0f + t) + 0.5f * x * (1.0f - t * t) * k * (1.0f + 3.0f * c * x * x);
    });
    p.accumulate(self.grad.cwiseProduct(d));
  });
}

Var silu(const Var& a) {
  Matrix out = a.value().unaryExpr([](float x) { return x / (1.0f + std::exp(-x)); });
  return Var::from_op(std::move(out), {a}, [](Node& self) {
    Node& p = parent(self, 0);
    Matrix d = p.value.unaryExpr([](float x) {
      const float s = 1.0f / (1.0f + std::exp(-x));
      return s * (1.0f + x * (1.0f - s));
    });
    p.accumulate(self.grad.cwiseProduct(d));
  });
}

Var tanh(const Var& a) {
  Matrix out = a.value().array().tanh().matrix();
  return Var::from_op(out, {a}, [out](Node& self) {
    parent(self, 0).accumulate(self.grad.cwiseProduct((1.0f - out.array().square()).matrix()));
  });
}

Var exp(const Var& a) {
  Matrix out = a.value().array().exp().matrix();
  return Var::from_op(out, {a}, [out](Node& self) { parent(self, 0).accumulate(self.grad.cwiseProduct(out)); });
}

Var layer_norm(const Var& a, float eps) {
  const Index n = a.cols();
  Matrix xhat(a.rows(), n);
  Eigen::VectorXf inv_std(a.rows());
  for (Index i = 0; i < a.rows(); ++i) {
    const auto row = a.value().row(i);
    const float mean = row.mean();
    const float var = (row.array() - mean).square().mean();
    inv_std(i) = 1.0f / std::sqrt(var + eps);
    xhat.row(i) = (row.array() - mean) * inv_std(i);
  }
  return Var::from_op(xhat, {a}, [xhat, inv_std](Node& self) {
    Matrix g(self.grad.rows(), self.grad.cols());
    for (Index i = 0; i < g.rows(); ++i) {
      const auto gi = self.grad.row(i).array();
      const auto xi = xhat.row(i).array();
      g.row(i) = inv_std(i) * (gi - gi.mean() - xi * (gi * xi).mean());
    }
    parent(self, 0).accumulate(g);
  });
}

Var softmax_rows(const Var& a) {
  Matrix out(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    const float m = a.value().row(i).maxCoeff();
    out.row(i) = (a.value().row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return Var::from_op(out, {a}, [out](Node& self) {
    Matrix g(out.rows(), out.cols());
    for (Index i = 0; i < out.rows(); ++i) {
      const float dot = self.grad.row(i).dot(out.row(i));
      g.row(i) = out.row(i).array() * (self.grad.row(i).array() - dot);
    }
    parent(self, 0).accumulate(g);
  });
}

Var slice_rows(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw ValidationError("slice_rows: out of range");
  return Var::from_op(a.value().middleRows(start, count), {a}, [start, count](Node& self) {
    Node& p = parent(self, 0);
    if (p.grad.size() == 0) p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
    p.grad.middleRows(start, count) += self.grad;
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ValidationError("concat_rows: no inputs");
  Index total = 0;
  for (const auto& p : parts) {
    if (p.cols() != parts.front().cols()) throw ValidationError("concat_rows: column mismatch");
    total += p.rows();
  }
  Matrix out(total, parts.front().cols());
  Index offset = 0;
  for (const auto& p : parts) {
    out.middleRows(offset, p.rows()) = p.value();
    offset += p.rows();
  }
  return Var::from_op(std::move(out), parts, [](Node& self) {
    Index off = 0;
    for (auto& p : self.parents) {
      const Index r = p->value.rows();
      if (p->requires_grad) p->accumulate(self.grad.middleRows(off, r));
      off += r;
    }
  });
}

Var slice_cols(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ValidationError("slice_cols: out of range");
  return Var::from_op(a.value().middleCols(start, count), {a}, [start, count](Node& self) {
    Node& p = parent(self, 0);
    if (p.grad.size() == 0) p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
    p.grad.middleCols(start, count) += self.grad;
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ValidationError("concat_cols: no inputs");
  Index total = 0;
  for (const auto& p : parts) {
    if (p.rows() != parts.front().rows()) throw ValidationError("concat_cols: row mismatch");
    total += p.cols();
  }
  Matrix out(parts.front().rows(), total);
  Index offset = 0;
  for (const auto& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
  }
  return Var::from_op(std::move(out), parts, [](Node& self) {
    Index off = 0;
    for (auto& p : self.parents) {
      const Index c = p->value.cols();
      if (p->requires_grad) p->accumulate(self.grad.middleCols(off, c));
      off += c;
    }
  });
}

Var gather_rows(const Var& a, const std::vector<Index>& indices) {
  Matrix out(static_cast<Index>(indices.size()), a.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= a.rows()) throw ValidationError("gather_rows: index out of range");
    out.row(static_cast<Index>(i)) = a.value().row(indices[i]);
  }
  return Var::from_op(std::move(out), {a}, [indices](Node& self) {
    Node& p = parent(self, 0);
    Matrix g = Matrix::Zero(p.value.rows(), p.value.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) g.row(indices[i]) += self.grad.row(static_cast<Index>(i));
    p.accumulate(g);
  });
}

Var group_mean(const Var& a, Index group) {
  if (group <= 0 || a.rows() % group != 0) throw ValidationError("group_mean: rows not divisible by group");
  const Index m = a.rows() / group;
  Matrix out(m, a.cols());
  for (Index j = 0; j < m; ++j) out.row(j) = a.value().middleRows(j * group, group).colwise().mean();
  return Var::from_op(std::move(out), {a}, [group, m](Node& self) {
    Node& p = parent(self, 0);
    Matrix g(p.value.rows(), p.value.cols());
    for (Index j = 0; j < m; ++j) {
      g.middleRows(j * group, group).rowwise() = self.grad.row(j) / static_cast<float>(group);
    }
    p.accumulate(g);
  });
}

Var reshape(const Var& a, Index rows, Index cols) {
  if (rows * cols != a.rows() * a.cols()) throw ValidationError("reshape: element count mismatch");
  Matrix out = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  return Var::from_op(std::move(out), {a}, [](Node& self) {
    Node& p = parent(self, 0);
    p.accumulate(Eigen::Map<const Matrix>(self.grad.data(), p.value.rows(), p.value.cols()));
  });
}

Var permute(const Var& a, const std::vector<Index>& source, Index rows, Index cols) {
  if (static_cast<Index>(source.size()) != a.value().size() || rows * cols != a.value().size()) {
    throw ValidationError("permute: size mismatch");
  }
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < source.size(); ++i) out.data()[i] = a.value().data()[source[i]];
  return Var::from_op(std::move(out), {a}, [source](Node& self) {
    Node& p = parent(self, 0);
    Matrix g(p.value.rows(), p.value.cols());
    for (std::size_t i = 0; i < source.size(); ++i) g.data()[source[i]] = self.grad.data()[i];
    p.accumulate(g);
  });
}

Var sum_all(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return Var::from_op(std::move(out), {a}, [](Node& self) {
    Node& p = parent(self, 0);
    p.accumulate(Matrix::Constant(p.value.rows(), p.value.cols(), self.grad(0, 0)));
  });
}

Var mean_all(const Var& a) { return scale(sum_all(a), 1.0f / static_cast<float>(a.value().size())); }

Var mse(const Var& a, const Matrix& target) {
  if (a.rows() != target.rows() || a.cols() != target.cols()) throw ValidationError("mse: shape mismatch");
  Matrix diff = a.value() - target;
  const float n = static_cast<float>(diff.size());
  Matrix out(1, 1);
  out(0, 0) = static_cast<float>(diff.cast<double>().squaredNorm() / n);
  return Var::from_op(std::move(out), {a}, [diff, n](Node& self) {
    parent(self, 0).accumulate(diff * (2.0f * self.grad(0, 0) / n));
  });
}

}  // namespace mitosyn::nn
