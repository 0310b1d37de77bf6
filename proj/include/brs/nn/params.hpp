#pragma once

// Named parameter arrays, graph binding, noise and flat-vector arithmetic.

#include <Eigen/Dense>
#include <Eigen/QR>

#include <algorithm>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "brs/common.hpp"
#include "brs/nn/autodiff.hpp"

namespace brs::nn {

using ad::Matrix;

class ParameterVector {
 public:
  struct Entry {
    std::string name;
    Matrix value;
  };

  ParameterVector() = default;

  Matrix& add(std::string name, Matrix value) {
    if (contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    if (!value.allFinite()) throw NumericError("parameter '" + name + "' is not finite");
    entries_.push_back({std::move(name), std::move(value)});
    return entries_.back().value;
  }

  bool contains(std::string_view name) const { return find(name) != nullptr; }

  const Matrix& operator[](std::string_view name) const { return at(name); }
  Matrix& operator[](std::string_view name) { return const_cast<Matrix&>(std::as_const(*this).at(name)); }

  const Matrix& at(std::string_view name) const {
    if (const Entry* e = find(name)) return e->value;
    throw ConfigError("unknown parameter '" + std::string(name) + "'");
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }

  Eigen::Index total_dim() const {
    Eigen::Index n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  /// Entries concatenated in insertion order, each in column-major order.
  Eigen::VectorXd flatten() const {
    Eigen::VectorXd out(total_dim());
    Eigen::Index k = 0;
    for (const auto& e : entries_) {
      out.segment(k, e.value.size()) = Eigen::Map<const Eigen::VectorXd>(e.value.data(), e.value.size());
      k += e.value.size();
    }
    return out;
  }

  void assign_flat(const Eigen::VectorXd& flat) {
    if (flat.size() != total_dim()) throw ConfigError("assign_flat: dimension mismatch");
    Eigen::Index k = 0;
    for (auto& e : entries_) {
      Eigen::Map<Eigen::VectorXd>(e.value.data(), e.value.size()) = flat.segment(k, e.value.size());
      k += e.value.size();
    }
  }

  /// Same names and shapes, all zeros.
  ParameterVector zeros_like() const {
    ParameterVector z;
    for (const auto& e : entries_) z.add(e.name, Matrix::Zero(e.value.rows(), e.value.cols()));
    return z;
  }

  bool same_layout(const ParameterVector& o) const {
    if (o.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      const auto& a = entries_[i];
      const auto& b = o.entries_[i];
      if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols()) return false;
    }
    return true;
  }

  /// this += k * o
  void axpy(double k, const ParameterVector& o) {
    require_layout(o);
    for (std::size_t i = 0; i < size(); ++i) entries_[i].value += k * o.entries_[i].value;
  }

  ParameterVector& operator+=(const ParameterVector& o) {
    axpy(1.0, o);
    return *this;
  }
  ParameterVector& operator-=(const ParameterVector& o) {
    axpy(-1.0, o);
    return *this;
  }
  ParameterVector& operator*=(double k) {
    for (auto& e : entries_) e.value *= k;
    return *this;
  }
  friend ParameterVector operator+(ParameterVector a, const ParameterVector& b) { return a += b; }
  friend ParameterVector operator-(ParameterVector a, const ParameterVector& b) { return a -= b; }
  friend ParameterVector operator*(ParameterVector a, double k) { return a *= k; }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& e : entries_) s += e.value.squaredNorm();
    return s;
  }
  double norm() const { return std::sqrt(squared_norm()); }

  bool all_finite() const {
    return std::all_of(entries_.begin(), entries_.end(), [](const Entry& e) { return e.value.allFinite(); });
  }

  bool operator==(const ParameterVector& o) const {
    if (!same_layout(o)) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      if (entries_[i].value != o.entries_[i].value) return false;
    }
    return true;
  }

  void require_layout(const ParameterVector& o) const {
    if (!same_layout(o)) throw ConfigError("parameter layouts differ");
  }

 private:
  const Entry* find(std::string_view name) const {
    for (const auto& e : entries_) {
      if (e.name == name) return &e;
    }
    return nullptr;
  }

  std::vector<Entry> entries_;
};

/// Parameters bound as graph leaves for one forward/backward pass. Each
/// binding owns fresh leaves, so concurrent passes never share gradient
/// storage.
class BoundParams {
 public:
  BoundParams(const ParameterVector& params, bool requires_grad) : src_(&params) {
    vars_.reserve(params.size());
    for (const auto& e : params.entries()) {
      vars_.push_back(requires_grad ? ad::parameter(e.value) : ad::constant(e.value));
    }
  }

  const ad::Var& operator[](std::string_view name) const {
    const auto& es = src_->entries();
    for (std::size_t i = 0; i < es.size(); ++i) {
      if (es[i].name == name) return vars_[i];
    }
    throw ConfigError("unknown parameter '" + std::string(name) + "'");
  }

  /// Runs backward from `root` and returns d(root)/d(params). Leaves that
  /// `root` does not reach get zero gradient.
  ParameterVector gradient(const ad::Var& root) const {
    for (const auto& v : vars_) v.node()->grad.resize(0, 0);
    ad::backward(root);
    ParameterVector g;
    const auto& es = src_->entries();
    for (std::size_t i = 0; i < es.size(); ++i) {
      const Matrix& gi = vars_[i].grad();
      if (gi.size() == es[i].value.size()) {
        g.add(es[i].name, gi);
      } else {
        g.add(es[i].name, Matrix::Zero(es[i].value.rows(), es[i].value.cols()));
      }
    }
    return g;
  }

 private:
  const ParameterVector* src_;
  std::vector<ad::Var> vars_;
};

/// Plain matrix view with the same lookup interface as BoundParams.
class PlainParams {
 public:
  explicit PlainParams(const ParameterVector& params) : src_(&params) {}
  const Matrix& operator[](std::string_view name) const { return src_->at(name); }

 private:
  const ParameterVector* src_;
};

/// Copy of `params` with i.i.d. N(0, sigma) added to every entry.
inline ParameterVector add_gaussian_noise(const ParameterVector& params, double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) throw ConfigError("noise standard deviation must be >= 0");
  ParameterVector out = params;
  if (sigma == 0.0) return out;
  std::normal_distribution<double> dist(0.0, sigma);
  for (auto& e : out.entries()) {
    for (Eigen::Index i = 0; i < e.value.size(); ++i) e.value.data()[i] += dist(rng);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Initializers.

/// U(-1, 1) / sqrt(fan_in), fan_in = rows.
inline Matrix init_scaled_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  const double s = 1.0 / std::sqrt(static_cast<double>(rows));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * uniform01(rng) - 1.0) * s;
  return m;
}

/// Square orthogonal matrix from the QR factorization of a Gaussian matrix,
/// with column signs fixed by the diagonal of R.
inline Matrix init_orthogonal(Eigen::Index n, Rng& rng) {
  Matrix g(n, n);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

}  // namespace brs::nn
