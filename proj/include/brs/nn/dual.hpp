#pragma once

// Forward-mode dual numbers with N tangent directions. Nesting
// Dual<Dual<double, N>, M> yields second derivatives.

#include <array>
#include <cmath>

namespace brs::nn {

template <class T, int N>
struct Dual {
  T v{};
  std::array<T, N> d{};

  Dual() = default;
  Dual(double x) : v(x) {}  // NOLINT(google-explicit-constructor): constants mix freely
  Dual(T x, std::array<T, N> dx) : v(std::move(x)), d(std::move(dx)) {}

  /// Independent variable number `k`.
  static Dual variable(T x, int k) {
    Dual r(std::move(x), {});
    r.d[static_cast<std::size_t>(k)] = T(1.0);
    return r;
  }

  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (int i = 0; i < N; ++i) d[i] += o.d[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (int i = 0; i < N; ++i) d[i] -= o.d[i];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    for (int i = 0; i < N; ++i) d[i] = d[i] * o.v + v * o.d[i];
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const T inv = T(1.0) / o.v;
    for (int i = 0; i < N; ++i) d[i] = (d[i] - v * inv * o.d[i]) * inv;
    v *= inv;
    return *this;
  }
  friend Dual operator+(Dual a, const Dual& b) { return a += b; }
  friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
  friend Dual operator*(Dual a, const Dual& b) { return a *= b; }
  friend Dual operator/(Dual a, const Dual& b) { return a /= b; }
  friend Dual operator-(Dual a) {
    a.v = -a.v;
    for (auto& x : a.d) x = -x;
    return a;
  }
};

template <class T, int N>
Dual<T, N> exp(const Dual<T, N>& a) {
  using std::exp;
  Dual<T, N> r;
  r.v = exp(a.v);
  for (int i = 0; i < N; ++i) r.d[i] = r.v * a.d[i];
  return r;
}

template <class T, int N>
Dual<T, N> log(const Dual<T, N>& a) {
  using std::log;
  Dual<T, N> r;
  r.v = log(a.v);
  const T inv = T(1.0) / a.v;
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * inv;
  return r;
}

inline double primal(double x) { return x; }
template <class T, int N>
double primal(const Dual<T, N>& x) {
  return primal(x.v);
}

/// 1 / (1 + exp(-x)), written with the ops above so it works for any nesting.
template <class T>
T logistic(const T& x) {
  using std::exp;
  return T(1.0) / (T(1.0) + exp(-x));
}

}  // namespace brs::nn
