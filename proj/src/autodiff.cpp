#include "josnc/autodiff.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace josnc::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

MatMap as_matrix(Tensor& t) {
  return MatMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

ConstMatMap as_matrix(const Tensor& t) {
  return ConstMatMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                     static_cast<Eigen::Index>(t.cols()));
}

Tensor& ensure_grad(Node& n) {
  if (n.grad.size() != n.value.size() || !n.grad.same_shape(n.value)) {
    n.grad = Tensor(n.value.shape(), 0.0);
  }
  return n.grad;
}

// Builds the result node; records parents and the backward closure only when
// some input participates in differentiation.
Var make_result(Tensor value, std::vector<std::shared_ptr<Node>> inputs,
                std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool any = std::any_of(inputs.begin(), inputs.end(),
                         [](const auto& p) { return p->requires_grad; });
  if (any) {
    node->requires_grad = true;
    node->parents = std::move(inputs);
    node->backward_fn = std::move(backward_fn);
  }
  return Var::from_node(std::move(node));
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value())) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                a.value().shape_string() + " vs " + b.value().shape_string());
  }
}

void require_finite(const Tensor& t, const char* op) {
  for (double v : t.values()) {
    if (!std::isfinite(v)) throw std::domain_error(std::string(op) + ": non-finite input");
  }
}

}  // namespace

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var Var::from_node(std::shared_ptr<Node> node) {
  Var v;
  v.node_ = std::move(node);
  return v;
}

void Var::zero_grad() {
  if (node_) node_->grad = Tensor();
}

double Var::item() const {
  if (value().size() != 1) {
    throw std::invalid_argument("item() on tensor of shape " + value().shape_string());
  }
  return value()[0];
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimensions differ " + a.value().shape_string() +
                                " x " + b.value().shape_string());
  }
  Tensor out = Tensor::matrix(a.rows(), b.cols());
  as_matrix(out).noalias() = as_matrix(a.value()) * as_matrix(b.value());
  auto pa = a.node();
  auto pb = b.node();
  return make_result(std::move(out), {pa, pb}, [pa, pb](Node& self) {
    auto g = as_matrix(std::as_const(self.grad));
    if (pa->requires_grad) {
      as_matrix(ensure_grad(*pa)).noalias() += g * as_matrix(std::as_const(pb->value)).transpose();
    }
    if (pb->requires_grad) {
      as_matrix(ensure_grad(*pb)).noalias() += as_matrix(std::as_const(pa->value)).transpose() * g;
    }
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("matmul_nt: inner dimensions differ " + a.value().shape_string() +
                                " x " + b.value().shape_string() + "^T");
  }
  Tensor out = Tensor::matrix(a.rows(), b.rows());
  as_matrix(out).noalias() = as_matrix(a.value()) * as_matrix(b.value()).transpose();
  auto pa = a.node();
  auto pb = b.node();
  return make_result(std::move(out), {pa, pb}, [pa, pb](Node& self) {
    auto g = as_matrix(std::as_const(self.grad));
    if (pa->requires_grad) {
      as_matrix(ensure_grad(*pa)).noalias() += g * as_matrix(std::as_const(pb->value));
    }
    if (pb->requires_grad) {
      as_matrix(ensure_grad(*pb)).noalias() += g.transpose() * as_matrix(std::as_const(pa->value));
    }
  });
}

Var add(const Var& a, const Var& b) {
  const bool broadcast = !a.value().same_shape(b.value());
  if (broadcast && (b.rows() != 1 || b.cols() != a.cols())) {
    throw std::invalid_argument("add: cannot broadcast " + b.value().shape_string() + " onto " +
                                a.value().shape_string());
  }
  Tensor out = a.value();
  const std::size_t cols = a.cols();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] += broadcast ? b.value()[i % cols] : b.value()[i];
  }
  auto pa = a.node();
  auto pb = b.node();
  return make_result(std::move(out), {pa, pb}, [pa, pb, broadcast, cols](Node& self) {
    if (pa->requires_grad) {
      auto& g = ensure_grad(*pa);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      auto& g = ensure_grad(*pb);
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        g[broadcast ? i % cols : i] += self.grad[i];
      }
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  auto pa = a.node();
  auto pb = b.node();
  return make_result(std::move(out), {pa, pb}, [pa, pb](Node& self) {
    if (pa->requires_grad) {
      auto& g = ensure_grad(*pa);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      auto& g = ensure_grad(*pb);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  auto pa = a.node();
  auto pb = b.node();
  return make_result(std::move(out), {pa, pb}, [pa, pb](Node& self) {
    if (pa->requires_grad) {
      auto& g = ensure_grad(*pa);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb->value[i];
    }
    if (pb->requires_grad) {
      auto& g = ensure_grad(*pb);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa->value[i];
    }
  });
}

Var scale(const Var& a, double factor) {
  Tensor out = a.value();
  for (auto& v : out.values()) v *= factor;
  auto pa = a.node();
  return make_result(std::move(out), {pa}, [pa, factor](Node& self) {
    auto& g = ensure_grad(*pa);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

Var add_scalar(const Var& a, double offset) {
  Tensor out = a.value();
  for (auto& v : out.values()) v += offset;
  auto pa = a.node();
  return make_result(std::move(out), {pa}, [pa](Node& self) {
    auto& g = ensure_grad(*pa);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Var relu(const Var& a) {
  Tensor out = a.value();
  for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
  auto pa = a.node();
  return make_result(std::move(out), {pa}, [pa](Node& self) {
    auto& g = ensure_grad(*pa);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (pa->value[i] > 0.0) g[i] += self.grad[i];
    }
  });
}

Var softmax(const Var& a, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("softmax: temperature must be positive");
  require_finite(a.value(), "softmax");
  Tensor out = a.value();
  const std::size_t rows = out.rows();
  const std::size_t cols = out.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = out.row_span(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (auto& v : row) {
      v = std::exp((v - mx) / temperature);
      z += v;
    }
    for (auto& v : row) v /= z;
  }
  auto pa = a.node();
  auto result = make_result(std::move(out), {pa}, nullptr);
  if (result.requires_grad()) {
    result.node()->backward_fn = [pa, rows, cols, temperature](Node& self) {
      auto& g = ensure_grad(*pa);
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) dot += self.grad.at(r, c) * self.value.at(r, c);
        for (std::size_t c = 0; c < cols; ++c) {
          g.at(r, c) += self.value.at(r, c) * (self.grad.at(r, c) - dot) / temperature;
        }
      }
    };
  }
  return result;
}

Var log_softmax(const Var& a, double temperature) {
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("log_softmax: temperature must be positive");
  }
  require_finite(a.value(), "log_softmax");
  Tensor out = a.value();
  const std::size_t rows = out.rows();
  const std::size_t cols = out.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = out.data().data() + r * cols;
    const double mx = *std::max_element(row, row + cols) / temperature;
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] = row[c] / temperature - mx;
      z += std::exp(row[c]);
    }
    const double lz = std::log(z);
    for (std::size_t c = 0; c < cols; ++c) row[c] -= lz;
  }
  auto pa = a.node();
  return make_result(std::move(out), {pa}, [pa, rows, cols, temperature](Node& self) {
    auto& g = ensure_grad(*pa);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* up = self.grad.data().data() + r * cols;
      const double* ls = self.value.data().data() + r * cols;
      double* out = g.data().data() + r * cols;
      double total = 0.0;
      for (std::size_t c = 0; c < cols; ++c) total += up[c];
      for (std::size_t c = 0; c < cols; ++c) {
        out[c] += (up[c] - std::exp(ls[c]) * total) / temperature;
      }
    }
  });
}

Var log(const Var& a) {
  Tensor out = a.value();
  for (auto& v : out.values()) v = std::log(v + kLogFloor);
  auto pa = a.node();
  return make_result(std::move(out), {pa}, [pa](Node& self) {
    auto& g = ensure_grad(*pa);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / (pa->value[i] + kLogFloor);
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  auto pa = a.node();
  return make_result(Tensor({1}, std::vector<double>{s}), {pa}, [pa](Node& self) {
    auto& g = ensure_grad(*pa);
    for (auto& v : g.values()) v += self.grad[0];
  });
}

Var mean(const Var& a) {
  const auto n = static_cast<double>(a.value().size());
  if (a.value().size() == 0) throw std::invalid_argument("mean of empty tensor");
  return scale(sum(a), 1.0 / n);
}

Var row_sum(const Var& a) {
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  Tensor out = Tensor::matrix(rows, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (double v : a.value().row_span(r)) s += v;
    out[r] = s;
  }
  auto pa = a.node();
  return make_result(std::move(out), {pa}, [pa, rows, cols](Node& self) {
    auto& g = ensure_grad(*pa);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) g.at(r, c) += self.grad[r];
    }
  });
}

Var l2_normalize(const Var& a) {
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  Tensor out = a.value();
  std::vector<double> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = out.row_span(r);
    double ss = 0.0;
    for (double v : row) ss += v * v;
    norms[r] = std::sqrt(ss);
    if (norms[r] < kLogFloor) {
      // Degenerate row: pin to the first basis vector, no gradient flows back.
      std::fill(row.begin(), row.end(), 0.0);
      if (cols > 0) row[0] = 1.0;
      norms[r] = 0.0;
      continue;
    }
    for (auto& v : row) v /= norms[r];
  }
  auto pa = a.node();
  auto result = make_result(std::move(out), {pa}, nullptr);
  if (result.requires_grad()) {
    result.node()->backward_fn = [pa, rows, cols, norms = std::move(norms)](Node& self) {
      auto& g = ensure_grad(*pa);
      for (std::size_t r = 0; r < rows; ++r) {
        if (norms[r] == 0.0) continue;
        if (norms[r] == 0.0) continue;
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) dot += self.grad.at(r, c) * self.value.at(r, c);
        for (std::size_t c = 0; c < cols; ++c) {
          g.at(r, c) += (self.grad.at(r, c) - self.value.at(r, c) * dot) / norms[r];
        }
      }
    };
  }
  return result;
}

Var concat_cols(const Var& a, const Var& b) {
  if (a.rows() != b.rows()) {
    throw std::invalid_argument("concat_cols: row counts differ " + a.value().shape_string() +
                                " vs " + b.value().shape_string());
  }
  const std::size_t rows = a.rows();
  const std::size_t ca = a.cols();
  const std::size_t cb = b.cols();
  Tensor out = Tensor::matrix(rows, ca + cb);
  const double* av = a.value().data().data();
  const double* bv = b.value().data().data();
  double* ov = out.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(av + r * ca, av + (r + 1) * ca, ov + r * (ca + cb));
    std::copy(bv + r * cb, bv + (r + 1) * cb, ov + r * (ca + cb) + ca);
  }
  auto pa = a.node();
  auto pb = b.node();
  return make_result(std::move(out), {pa, pb}, [pa, pb, rows, ca, cb](Node& self) {
    const double* up = self.grad.data().data();
    if (pa->requires_grad) {
      double* g = ensure_grad(*pa).data().data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < ca; ++c) g[r * ca + c] += up[r * (ca + cb) + c];
    }
    if (pb->requires_grad) {
      double* g = ensure_grad(*pb).data().data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cb; ++c) g[r * cb + c] += up[r * (ca + cb) + ca + c];
    }
  });
}

Var column(const Var& a, std::size_t c) {
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  if (c >= cols) {
    throw std::out_of_range("column: index " + std::to_string(c) + " outside " +
                            a.value().shape_string());
  }
  Tensor out = Tensor::matrix(rows, 1);
  for (std::size_t r = 0; r < rows; ++r) out[r] = a.value()[r * cols + c];
  auto pa = a.node();
  return make_result(std::move(out), {pa}, [pa, rows, cols, c](Node& self) {
    auto& g = ensure_grad(*pa);
    for (std::size_t r = 0; r < rows; ++r) g[r * cols + c] += self.grad[r];
  });
}

void backward(const Var& loss) {
  if (!loss.node() || loss.value().size() != 1) {
    throw std::invalid_argument("backward requires a scalar loss, got shape " +
                                (loss.node() ? loss.value().shape_string() : std::string("<null>")));
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.push_back({parent, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  ensure_grad(*loss.node())[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.size() == n->value.size()) n->backward_fn(*n);
  }
  // Interior buffers are no longer needed; leaves keep theirs.
  for (Node* n : order) {
    if (n->backward_fn) n->grad = Tensor();
  }
}

}  // namespace josnc::ad
