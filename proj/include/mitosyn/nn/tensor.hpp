#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

namespace mitosyn::nn {

using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

struct Node {
  Matrix value;
  Matrix grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void accumulate(const Matrix& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

// Handle to a node of a dynamically built computation graph. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Matrix value, bool requires_grad = false);

  static Var parameter(Matrix value) { return Var(std::move(value), true); }

  // Result of an operation. The graph edge and backward closure are kept only
  // when some parent requires a gradient.
  static Var from_op(Matrix value, std::vector<Var> parents, std::function<void(Node&)> backward);

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() != 0; }
  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad() { node_->grad.resize(0, 0); }

  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  float item() const { return node_->value(0, 0); }

  // Reverse-mode sweep from a 1x1 value.
  void backward() const;

  Node* node() const { return node_.get(); }
  bool defined() const { return node_ != nullptr; }

 private:
  std::shared_ptr<Node> node_;
};

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, float s);
Var transpose(const Var& a);

// Broadcasts a 1 x n row over every row of `a`.
Var add_row(const Var& a, const Var& row);
Var mul_row(const Var& a, const Var& row);
// `b` has r rows; row i of `a` receives row (i mod r) of `b`.
Var add_tiled(const Var& a, const Var& b);
// `b` has m rows; row i of `a` receives row (i / (a.rows / m)) of `b`.
Var add_grouped(const Var& a, const Var& b);

Var relu(const Var& a);
Var gelu(const Var& a);
Var silu(const Var& a);
Var tanh(const Var& a);
Var exp(const Var& a);

// Per-row standardization without affine parameters.
Var layer_norm(const Var& a, float eps = 1e-5f);
Var softmax_rows(const Var& a);

Var slice_rows(const Var& a, Index start, Index count);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(const Var& a, Index start, Index count);
Var concat_cols(const std::vector<Var>& parts);
Var gather_rows(const Var& a, const std::vector<Index>& indices);
// Mean over consecutive groups of `group` rows.
Var group_mean(const Var& a, Index group);
// Row-major reshape.
Var reshape(const Var& a, Index rows, Index cols);

// out.data[i] = a.data[source[i]] with `source` a permutation of all elements.
Var permute(const Var& a, const std::vector<Index>& source, Index rows, Index cols);

Var sum_all(const Var& a);
Var mean_all(const Var& a);
// mean((a - target)^2); target is a constant.
Var mse(const Var& a, const Matrix& target);

}  // namespace mitosyn::nn
