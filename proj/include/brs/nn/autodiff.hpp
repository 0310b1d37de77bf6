#pragma once

// Reverse-mode automatic differentiation over dense double matrices.
//
// A Var is a shared handle to a graph node. Ops whose inputs are all
// constants produce constants (no parents, no backward closure), so the same
// model code runs as a plain forward pass when parameters are bound as
// constants. Rows are batch entries throughout.

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "brs/common.hpp"

namespace brs::ad {

using Matrix = Eigen::MatrixXd;

struct Node {
  Matrix value;
  Matrix grad;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  const char* op = "leaf";
  bool requires_grad = false;
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Matrix& value() const { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  double item() const {
    if (node_->value.size() != 1) throw ConfigError("item() on a non-scalar value");
    return node_->value(0, 0);
  }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const char* op() const { return node_->op; }
  bool defined() const { return static_cast<bool>(node_); }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

namespace detail {

/// One vectorized pass: x * 0 is 0 for finite x and NaN otherwise.
inline bool all_finite(const Matrix& m) { return (m.array() * 0.0).sum() == 0.0; }

inline void check_finite(const Matrix& m, const char* op) {
  if (!all_finite(m)) {
    throw NumericError(std::string("non-finite value produced by '") + op + "'");
  }
}

inline Var leaf(Matrix value, bool requires_grad, const char* op) {
  check_finite(value, op);
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  n->op = op;
  return Var(std::move(n));
}

/// Creates an op node. `bw` receives the node and adds into the grads of
/// parents that require them.
template <class Backward>
Var make(const char* op, Matrix value, std::initializer_list<Var> inputs, Backward&& bw) {
  check_finite(value, op);
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = op;
  bool any = false;
  for (const Var& v : inputs) any = any || v.requires_grad();
  if (any) {
    n->requires_grad = true;
    for (const Var& v : inputs) n->parents.push_back(v.node());
    n->backward = std::forward<Backward>(bw);
  }
  return Var(std::move(n));
}

inline bool wants(const Node& self, std::size_t i) { return self.parents[i]->requires_grad; }

inline void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ConfigError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                      std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                      std::to_string(b.cols()) + ")");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Graph-free overloads on plain matrices. Var ops compute their forward value
// through these, so a graph forward and a plain forward agree bit for bit.

inline Matrix add(const Matrix& a, const Matrix& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return a + b;
  if (b.size() == 1) return (a.array() + b(0, 0)).matrix();
  if (a.size() == 1) return (b.array() + a(0, 0)).matrix();
  if (b.rows() == 1 && b.cols() == a.cols()) return a.rowwise() + b.row(0);
  throw ConfigError("add: shape mismatch");
}
inline Matrix neg(const Matrix& a) { return -a; }
inline Matrix scale(const Matrix& a, double k) { return a * k; }
inline Matrix add_scalar(const Matrix& a, double k) { return (a.array() + k).matrix(); }
inline Matrix sub(const Matrix& a, const Matrix& b) { return add(a, neg(b)); }
inline Matrix mul(const Matrix& a, const Matrix& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return a.cwiseProduct(b);
  if (b.size() == 1) return a * b(0, 0);
  if (a.size() == 1) return b * a(0, 0);
  if (b.cols() == 1 && b.rows() == a.rows()) return a.array().colwise() * b.col(0).array();
  throw ConfigError("mul: shape mismatch");
}
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ConfigError("matmul: inner dimensions differ");
  return a * b;
}
// Eigen evaluates double tanh one scalar at a time; this form vectorizes
// through exp and is exact to a few ulps away from zero.
inline Matrix tanh(const Matrix& a) {
  const Eigen::ArrayXXd e = (-2.0 * a.array().abs()).exp();
  return (a.array().sign() * (1.0 - e) / (1.0 + e)).matrix();
}
inline Matrix relu(const Matrix& a) { return a.cwiseMax(0.0); }
inline Matrix sigmoid(const Matrix& a) { return (1.0 / (1.0 + (-a.array()).exp())).matrix(); }
inline Matrix log_sigmoid(const Matrix& a) {
  const auto& x = a.array();
  return (-((-x).max(0.0) + (-x.abs()).exp().log1p())).matrix();
}
inline Matrix exp(const Matrix& a) { return a.array().exp().matrix(); }
inline Matrix log(const Matrix& a) { return a.array().log().matrix(); }
inline Matrix square(const Matrix& a) { return a.array().square().matrix(); }
inline Matrix log_softmax(const Matrix& x) {
  Eigen::VectorXd mx = x.rowwise().maxCoeff();
  Matrix shifted = x.colwise() - mx;
  Eigen::VectorXd lse = shifted.array().exp().rowwise().sum().log().matrix();
  return shifted.colwise() - lse;
}
inline Matrix softmax(const Matrix& x) {
  Eigen::VectorXd mx = x.rowwise().maxCoeff();
  Matrix e = (x.colwise() - mx).array().exp().matrix();
  Eigen::VectorXd z = e.rowwise().sum();
  return e.array().colwise() / z.array();
}
inline Matrix concat_cols(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ConfigError("concat_cols: row counts differ");
  Matrix v(a.rows(), a.cols() + b.cols());
  v << a, b;
  return v;
}
inline Matrix slice_cols(const Matrix& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ConfigError("slice_cols: out of range");
  return a.middleCols(start, count);
}
inline Matrix stop_gradient(const Matrix& a) { return a; }
inline const Matrix& value_of(const Matrix& a) { return a; }

inline Var constant(Matrix value) { return detail::leaf(std::move(value), false, "constant"); }
inline Var parameter(Matrix value) { return detail::leaf(std::move(value), true, "parameter"); }
inline Var scalar(double x) { return constant(Matrix::Constant(1, 1, x)); }

/// Accumulates d(root)/d(node) for every node reachable from `root`.
/// Gradients of all reachable nodes are reset first, so the same graph can be
/// differentiated from several roots in sequence.
inline void backward(const Var& root) {
  if (root.rows() != 1 || root.cols() != 1) throw ConfigError("backward() needs a scalar root");
  if (!root.requires_grad()) return;
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node* p = n->parents[i++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  for (Node* n : order) n->grad = Matrix::Zero(n->value.rows(), n->value.cols());
  root.node()->grad(0, 0) = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->backward) continue;
    if (!detail::all_finite(n->grad)) {
      throw NumericError(std::string("non-finite gradient at node '") + n->op + "'");
    }
    n->backward(*n);
  }
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic with limited broadcasting: either operand may be a
// 1x1 scalar, and the second operand of add may be a 1xC row (bias).

inline Var add(const Var& a, const Var& b) {
  Matrix v = add(a.value(), b.value());
  return detail::make("add", std::move(v), {a, b}, [](Node& s) {
    for (std::size_t i = 0; i < 2; ++i) {
      if (!detail::wants(s, i)) continue;
      Matrix& g = s.parents[i]->grad;
      if (g.rows() == s.grad.rows() && g.cols() == s.grad.cols()) {
        g += s.grad;
      } else if (g.size() == 1) {
        g(0, 0) += s.grad.sum();
      } else {
        g += s.grad.colwise().sum();
      }
    }
  });
}

inline Var neg(const Var& a) {
  return detail::make("neg", neg(a.value()), {a}, [](Node& s) { s.parents[0]->grad -= s.grad; });
}

inline Var scale(const Var& a, double k) {
  return detail::make("scale", scale(a.value(), k), {a}, [k](Node& s) { s.parents[0]->grad += k * s.grad; });
}

inline Var add_scalar(const Var& a, double k) {
  return detail::make("add_scalar", add_scalar(a.value(), k), {a},
                      [](Node& s) { s.parents[0]->grad += s.grad; });
}

inline Var sub(const Var& a, const Var& b) { return add(a, neg(b)); }

/// Elementwise product. Either operand may be a 1x1 scalar; `b` may be an
/// Nx1 column that scales each row of `a`.
inline Var mul(const Var& a, const Var& b) {
  Matrix v = mul(a.value(), b.value());
  return detail::make("mul", std::move(v), {a, b}, [](Node& s) {
    for (std::size_t i = 0; i < 2; ++i) {
      if (!detail::wants(s, i)) continue;
      const Matrix& other = s.parents[1 - i]->value;
      Matrix& g = s.parents[i]->grad;
      Matrix full = mul(s.grad, other);  // d out / d this, at output shape
      if (g.rows() == full.rows() && g.cols() == full.cols()) {
        g += full;
      } else if (g.size() == 1) {
        g(0, 0) += full.sum();
      } else {
        g += full.rowwise().sum();
      }
    }
  });
}

inline Var matmul(const Var& a, const Var& b) {
  Matrix v = matmul(a.value(), b.value());
  return detail::make("matmul", std::move(v), {a, b}, [](Node& s) {
    if (detail::wants(s, 0)) s.parents[0]->grad.noalias() += s.grad * s.parents[1]->value.transpose();
    if (detail::wants(s, 1)) s.parents[1]->grad.noalias() += s.parents[0]->value.transpose() * s.grad;
  });
}

inline Var transpose(const Var& a) {
  return detail::make("transpose", a.value().transpose(), {a},
                      [](Node& s) { s.parents[0]->grad += s.grad.transpose(); });
}

// ---------------------------------------------------------------------------
// Pointwise nonlinearities.

inline Var tanh(const Var& a) {
  return detail::make("tanh", tanh(a.value()), {a}, [](Node& s) {
    s.parents[0]->grad.array() += s.grad.array() * (1.0 - s.value.array().square());
  });
}

inline Var relu(const Var& a) {
  return detail::make("relu", relu(a.value()), {a}, [](Node& s) {
    s.parents[0]->grad.array() += (s.parents[0]->value.array() > 0.0).select(s.grad.array(), 0.0);
  });
}

inline Var sigmoid(const Var& a) {
  return detail::make("sigmoid", sigmoid(a.value()), {a}, [](Node& s) {
    s.parents[0]->grad.array() += s.grad.array() * s.value.array() * (1.0 - s.value.array());
  });
}

/// log(sigmoid(x)) without overflow for large |x|.
inline Var log_sigmoid(const Var& a) {
  return detail::make("log_sigmoid", log_sigmoid(a.value()), {a}, [](Node& s) {
    s.parents[0]->grad.array() += s.grad.array() * (1.0 - s.value.array().exp());
  });
}

inline Var exp(const Var& a) {
  return detail::make("exp", exp(a.value()), {a},
                      [](Node& s) { s.parents[0]->grad.array() += s.grad.array() * s.value.array(); });
}

inline Var log(const Var& a) {
  return detail::make("log", log(a.value()), {a}, [](Node& s) {
    s.parents[0]->grad.array() += s.grad.array() / s.parents[0]->value.array();
  });
}

inline Var square(const Var& a) {
  return detail::make("square", square(a.value()), {a}, [](Node& s) {
    s.parents[0]->grad.array() += 2.0 * s.grad.array() * s.parents[0]->value.array();
  });
}

// ---------------------------------------------------------------------------
// Row-wise distributions. Each row of `logits` is one categorical.

inline Var log_softmax(const Var& logits) {
  return detail::make("log_softmax", log_softmax(logits.value()), {logits}, [](Node& s) {
    Matrix p = s.value.array().exp().matrix();
    Eigen::VectorXd gs = s.grad.rowwise().sum();
    s.parents[0]->grad += s.grad - (p.array().colwise() * gs.array()).matrix();
  });
}

inline Var softmax(const Var& logits) {
  return detail::make("softmax", softmax(logits.value()), {logits}, [](Node& s) {
    Eigen::VectorXd dot = s.grad.cwiseProduct(s.value).rowwise().sum();
    s.parents[0]->grad += (s.value.array() * (s.grad.colwise() - dot).array()).matrix();
  });
}

inline Matrix pick(const Matrix& a, const std::vector<int>& index) {
  if (static_cast<Eigen::Index>(index.size()) != a.rows()) throw ConfigError("pick: index count differs from rows");
  Matrix v(a.rows(), 1);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const int j = index[static_cast<std::size_t>(i)];
    if (j < 0 || j >= a.cols()) throw ConfigError("pick: column index out of range");
    v(i, 0) = a(i, j);
  }
  return v;
}

/// out(i) = a(i, index[i]); an Nx1 column.
inline Var pick(const Var& a, const std::vector<int>& index) {
  return detail::make("pick", pick(a.value(), index), {a}, [index](Node& s) {
    for (std::size_t i = 0; i < index.size(); ++i) {
      s.parents[0]->grad(static_cast<Eigen::Index>(i), index[i]) += s.grad(static_cast<Eigen::Index>(i), 0);
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions and reshaping.

inline Var sum(const Var& a) {
  return detail::make("sum", Matrix::Constant(1, 1, a.value().sum()), {a},
                      [](Node& s) { s.parents[0]->grad.array() += s.grad(0, 0); });
}

inline Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  return detail::make("mean", Matrix::Constant(1, 1, a.value().sum() / n), {a},
                      [n](Node& s) { s.parents[0]->grad.array() += s.grad(0, 0) / n; });
}

inline Var row_sum(const Var& a) {
  return detail::make("row_sum", a.value().rowwise().sum(), {a},
                      [](Node& s) { s.parents[0]->grad.colwise() += s.grad.col(0); });
}

inline Var concat_cols(const Var& a, const Var& b) {
  const Eigen::Index ac = a.cols();
  return detail::make("concat_cols", concat_cols(a.value(), b.value()), {a, b}, [ac](Node& s) {
    if (detail::wants(s, 0)) s.parents[0]->grad += s.grad.leftCols(ac);
    if (detail::wants(s, 1)) s.parents[1]->grad += s.grad.rightCols(s.grad.cols() - ac);
  });
}

inline Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  return detail::make("slice_cols", slice_cols(a.value(), start, count), {a}, [start, count](Node& s) {
    s.parents[0]->grad.middleCols(start, count) += s.grad;
  });
}

/// Stacks a 1xC row n times.
inline Var repeat_rows(const Var& a, Eigen::Index n) {
  if (a.rows() != 1) throw ConfigError("repeat_rows: expects a single row");
  return detail::make("repeat_rows", a.value().replicate(n, 1), {a},
                      [](Node& s) { s.parents[0]->grad += s.grad.colwise().sum(); });
}

/// Row i of the result is row index[i] of `a`.
inline Var gather_rows(const Var& a, const std::vector<Eigen::Index>& index) {
  Matrix v(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) v.row(static_cast<Eigen::Index>(i)) = a.value().row(index[i]);
  return detail::make("gather_rows", std::move(v), {a}, [index](Node& s) {
    for (std::size_t i = 0; i < index.size(); ++i) {
      s.parents[0]->grad.row(index[i]) += s.grad.row(static_cast<Eigen::Index>(i));
    }
  });
}

inline Matrix gather_rows(const Matrix& a, const std::vector<Eigen::Index>& index) {
  Matrix v(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) v.row(static_cast<Eigen::Index>(i)) = a.row(index[i]);
  return v;
}

/// Forward value unchanged, no gradient flows through.
inline Var stop_gradient(const Var& a) { return detail::leaf(a.value(), false, "stop_gradient"); }
inline const Matrix& value_of(const Var& a) { return a.value(); }

// ---------------------------------------------------------------------------
// Losses.

/// Mean Huber loss between equally shaped prediction and target.
inline Var huber(const Var& pred, const Var& target, double delta = 1.0) {
  detail::require_same_shape(pred, target, "huber");
  const Matrix r = pred.value() - target.value();
  const double n = static_cast<double>(r.size());
  const auto ar = r.array().abs();
  const double value = (ar <= delta).select(0.5 * r.array().square(), delta * (ar - 0.5 * delta)).sum() / n;
  return detail::make("huber", Matrix::Constant(1, 1, value), {pred, target}, [r, delta, n](Node& s) {
    Matrix d = (r.array().abs() <= delta).select(r.array(), delta * r.array().sign()).matrix() * (s.grad(0, 0) / n);
    if (detail::wants(s, 0)) s.parents[0]->grad += d;
    if (detail::wants(s, 1)) s.parents[1]->grad -= d;
  });
}

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator-(const Var& a) { return neg(a); }
inline Var operator*(const Var& a, double k) { return scale(a, k); }
inline Var operator*(double k, const Var& a) { return scale(a, k); }
inline Var operator+(const Var& a, double k) { return add_scalar(a, k); }

}  // namespace brs::ad
