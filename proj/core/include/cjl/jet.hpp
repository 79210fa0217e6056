#pragma once

// Second-order forward-mode differentiation in N variables: value, gradient and Hessian
// propagated through +, -, *, / and the elementary functions used by the built-in models.

#include <array>
#include <cmath>

namespace cjl {

template <int N>
struct Jet2 {
  double v = 0.0;
  std::array<double, N> d{};
  std::array<std::array<double, N>, N> h{};

  Jet2() = default;
  Jet2(double c) : v(c) {}  // NOLINT: constants promote implicitly

  static Jet2 variable(double value, int i) {
    Jet2 r(value);
    r.d[i] = 1.0;
    return r;
  }

  // Applies a scalar function with derivatives f1, f2 at v.
  Jet2 chain(double f0, double f1, double f2) const {
    Jet2 r(f0);
    for (int i = 0; i < N; ++i) r.d[i] = f1 * d[i];
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) r.h[i][j] = f2 * d[i] * d[j] + f1 * h[i][j];
    return r;
  }

  Jet2& operator+=(const Jet2& o) {
    v += o.v;
    for (int i = 0; i < N; ++i) d[i] += o.d[i];
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) h[i][j] += o.h[i][j];
    return *this;
  }
  Jet2& operator-=(const Jet2& o) {
    v -= o.v;
    for (int i = 0; i < N; ++i) d[i] -= o.d[i];
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) h[i][j] -= o.h[i][j];
    return *this;
  }
  Jet2& operator*=(const Jet2& o) {
    Jet2 r(v * o.v);
    for (int i = 0; i < N; ++i) r.d[i] = d[i] * o.v + v * o.d[i];
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j)
        r.h[i][j] = h[i][j] * o.v + d[i] * o.d[j] + d[j] * o.d[i] + v * o.h[i][j];
    *this = r;
    return *this;
  }
  Jet2& operator/=(const Jet2& o) { return *this *= o.chain(1.0 / o.v, -1.0 / (o.v * o.v), 2.0 / (o.v * o.v * o.v)); }

  Jet2 operator-() const {
    Jet2 r = *this;
    r.v = -v;
    for (int i = 0; i < N; ++i) r.d[i] = -d[i];
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) r.h[i][j] = -h[i][j];
    return r;
  }
};

template <int N> Jet2<N> operator+(Jet2<N> a, const Jet2<N>& b) { return a += b; }
template <int N> Jet2<N> operator-(Jet2<N> a, const Jet2<N>& b) { return a -= b; }
template <int N> Jet2<N> operator*(Jet2<N> a, const Jet2<N>& b) { return a *= b; }
template <int N> Jet2<N> operator/(Jet2<N> a, const Jet2<N>& b) { return a /= b; }
template <int N> Jet2<N> operator+(Jet2<N> a, double b) { a.v += b; return a; }
template <int N> Jet2<N> operator+(double b, Jet2<N> a) { a.v += b; return a; }
template <int N> Jet2<N> operator-(Jet2<N> a, double b) { a.v -= b; return a; }
template <int N> Jet2<N> operator-(double b, const Jet2<N>& a) { return (-a) + b; }
template <int N> Jet2<N> operator*(Jet2<N> a, double b) {
  a.v *= b;
  for (auto& x : a.d) x *= b;
  for (auto& row : a.h)
    for (auto& x : row) x *= b;
  return a;
}
template <int N> Jet2<N> operator*(double b, Jet2<N> a) { return a * b; }
template <int N> Jet2<N> operator/(Jet2<N> a, double b) { return a * (1.0 / b); }
template <int N> Jet2<N> operator/(double b, const Jet2<N>& a) {
  return a.chain(b / a.v, -b / (a.v * a.v), 2.0 * b / (a.v * a.v * a.v));
}

template <int N> Jet2<N> sqrt(const Jet2<N>& a) {
  double s = std::sqrt(a.v);
  return a.chain(s, 0.5 / s, -0.25 / (s * a.v));
}
template <int N> Jet2<N> exp(const Jet2<N>& a) {
  double e = std::exp(a.v);
  return a.chain(e, e, e);
}
template <int N> Jet2<N> sin(const Jet2<N>& a) { return a.chain(std::sin(a.v), std::cos(a.v), -std::sin(a.v)); }
template <int N> Jet2<N> cos(const Jet2<N>& a) { return a.chain(std::cos(a.v), -std::sin(a.v), -std::cos(a.v)); }

// Overloads so templated model code can be written once for double and Jet2.
inline double value_of(double x) { return x; }
template <int N> double value_of(const Jet2<N>& x) { return x.v; }

}  // namespace cjl
