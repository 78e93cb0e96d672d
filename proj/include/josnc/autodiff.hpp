#pragma once

// Reverse-mode automatic differentiation over dense row-major tensors.
//
// A Var is a handle to a graph node. Operations record a node only when at
// least one input requires a gradient, so evaluating a model whose leaves are
// all constants (the mean teacher) leaves nothing on the tape.

#include <functional>
#include <memory>
#include <vector>

#include "josnc/tensor.hpp"

namespace josnc::ad {

// Added inside every logarithm. Label smoothing keeps arguments away from
// zero; this only guards against underflow.
inline constexpr double kLogFloor = 1e-12;

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
};

class Var {
 public:
  Var() = default;
  Var(Tensor value, bool requires_grad);

  static Var parameter(Tensor value) { return Var(std::move(value), true); }
  static Var constant(Tensor value) { return Var(std::move(value), false); }

  const Tensor& value() const { return node_->value; }
  // Leaves only; used by the optimizer to apply updates in place.
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  bool has_grad() const { return node_ && node_->grad.size() == node_->value.size(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void zero_grad();

  double item() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

  const std::shared_ptr<Node>& node() const { return node_; }
  static Var from_node(std::shared_ptr<Node> node);

 private:
  std::shared_ptr<Node> node_;
};

Var matmul(const Var& a, const Var& b);
// a * transpose(b).
Var matmul_nt(const Var& a, const Var& b);
// Same shape, or `b` a single row broadcast across the rows of `a`.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double offset);
Var relu(const Var& a);
// Row-wise softmax of a / temperature.
Var softmax(const Var& a, double temperature = 1.0);
// Row-wise log(softmax(a / temperature)) via log-sum-exp; no floor needed.
Var log_softmax(const Var& a, double temperature = 1.0);
// Natural log of (a + kLogFloor).
Var log(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
// Per-row sums as a rows x 1 column.
Var row_sum(const Var& a);
// Row-wise L2 normalization. Rows with norm below kLogFloor map to e_0.
Var l2_normalize(const Var& a);
Var concat_cols(const Var& a, const Var& b);
// Column `c` of a matrix, as rows x 1.
Var column(const Var& a, std::size_t c);

// Accumulates d(loss)/d(leaf) into every leaf that requires a gradient.
// Throws std::invalid_argument unless `loss` holds exactly one element.
void backward(const Var& loss);

}  // namespace josnc::ad
