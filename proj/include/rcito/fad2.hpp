#pragma once

#include <array>
#include <cassert>
#include <cmath>

#include "rcito/fad.hpp"

// Second-order forward type: value, gradient, and packed symmetric Hessian
// over the active tangent basis of fad::ScopedWidth.  One evaluation of a
// scalar expression yields its full local Hessian, which the transcription
// uses to assemble exact weighted constraint curvature.
namespace rcito::fad2 {

inline constexpr int kCapacity = 30;  // widest local group among the systems
inline constexpr int kPacked = kCapacity * (kCapacity + 1) / 2;

// index of (i, j) with i <= j in the packed upper triangle
inline int packed(int i, int j) { return j * (j + 1) / 2 + i; }

inline int hess_size() {
  const int n = fad::width();
  return n * (n + 1) / 2;
}

struct Dual2 {
  double v;
  std::array<double, kCapacity> g;
  std::array<double, kPacked> h;

  Dual2() : v(0.0) { zero_tangent(); }
  Dual2(double value) : v(value) { zero_tangent(); }  // NOLINT: implicit by design

  void zero_tangent() {
    const int n = fad::width();
    assert(n <= kCapacity);
    for (int i = 0; i < n; ++i) g[i] = 0.0;
    const int m = n * (n + 1) / 2;
    for (int i = 0; i < m; ++i) h[i] = 0.0;
  }

  void seed(int slot) {
    assert(slot >= 0 && slot < fad::width());
    g[slot] = 1.0;
  }

  Dual2& operator+=(const Dual2& o) {
    const int n = fad::width();
    v += o.v;
    for (int i = 0; i < n; ++i) g[i] += o.g[i];
    const int m = n * (n + 1) / 2;
    for (int i = 0; i < m; ++i) h[i] += o.h[i];
    return *this;
  }
  Dual2& operator-=(const Dual2& o) {
    const int n = fad::width();
    v -= o.v;
    for (int i = 0; i < n; ++i) g[i] -= o.g[i];
    const int m = n * (n + 1) / 2;
    for (int i = 0; i < m; ++i) h[i] -= o.h[i];
    return *this;
  }
  // d2(ab) = a'' b + a' b' + b' a' + b'' a
  Dual2& operator*=(const Dual2& o) {
    const int n = fad::width();
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i <= j; ++i) {
        const int p = packed(i, j);
        h[p] = h[p] * o.v + o.h[p] * v + g[i] * o.g[j] + g[j] * o.g[i];
      }
    }
    for (int i = 0; i < n; ++i) g[i] = g[i] * o.v + v * o.g[i];
    v *= o.v;
    return *this;
  }
  Dual2& operator+=(double c) {
    v += c;
    return *this;
  }
  Dual2& operator-=(double c) {
    v -= c;
    return *this;
  }
  Dual2& operator*=(double c) {
    const int n = fad::width();
    v *= c;
    for (int i = 0; i < n; ++i) g[i] *= c;
    const int m = n * (n + 1) / 2;
    for (int i = 0; i < m; ++i) h[i] *= c;
    return *this;
  }
  Dual2& operator/=(double c) { return (*this) *= (1.0 / c); }
};

// f(a) with value fv, slope fp, curvature fpp at a.v:
// grad = fp a', hess = fp a'' + fpp a' a'^T
inline Dual2 chain(const Dual2& a, double fv, double fp, double fpp) {
  Dual2 r;
  r.v = fv;
  const int n = fad::width();
  for (int i = 0; i < n; ++i) r.g[i] = fp * a.g[i];
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i <= j; ++i) {
      const int p = packed(i, j);
      r.h[p] = fp * a.h[p] + fpp * a.g[i] * a.g[j];
    }
  }
  return r;
}

inline Dual2 operator+(Dual2 a, const Dual2& b) { return a += b; }
inline Dual2 operator-(Dual2 a, const Dual2& b) { return a -= b; }
inline Dual2 operator*(Dual2 a, const Dual2& b) { return a *= b; }
inline Dual2 operator+(Dual2 a, double b) { return a += b; }
inline Dual2 operator-(Dual2 a, double b) { return a -= b; }
inline Dual2 operator*(Dual2 a, double b) { return a *= b; }
inline Dual2 operator/(Dual2 a, double b) { return a *= (1.0 / b); }
inline Dual2 operator+(double a, Dual2 b) { return b += a; }
inline Dual2 operator*(double a, Dual2 b) { return b *= a; }
inline Dual2 operator-(double a, const Dual2& b) {
  Dual2 r(a);
  return r -= b;
}
inline Dual2 operator-(const Dual2& a) {
  Dual2 r(a);
  return r *= -1.0;
}
inline Dual2 operator+(const Dual2& a) { return a; }

inline Dual2 recip(const Dual2& a) {
  const double inv = 1.0 / a.v;
  return chain(a, inv, -inv * inv, 2.0 * inv * inv * inv);
}
inline Dual2 operator/(const Dual2& a, const Dual2& b) { return a * recip(b); }
inline Dual2 operator/(double a, const Dual2& b) { return a * recip(b); }

inline bool operator<(const Dual2& a, const Dual2& b) { return a.v < b.v; }
inline bool operator>(const Dual2& a, const Dual2& b) { return a.v > b.v; }
inline bool operator<=(const Dual2& a, const Dual2& b) { return a.v <= b.v; }
inline bool operator>=(const Dual2& a, const Dual2& b) { return a.v >= b.v; }
inline bool operator<(const Dual2& a, double b) { return a.v < b; }
inline bool operator>(const Dual2& a, double b) { return a.v > b; }
inline bool operator<=(const Dual2& a, double b) { return a.v <= b; }
inline bool operator>=(const Dual2& a, double b) { return a.v >= b; }
inline bool operator<(double a, const Dual2& b) { return a < b.v; }
inline bool operator>(double a, const Dual2& b) { return a > b.v; }

inline const Dual2& min(const Dual2& a, const Dual2& b) {
  return a.v <= b.v ? a : b;
}
inline const Dual2& max(const Dual2& a, const Dual2& b) {
  return a.v >= b.v ? a : b;
}
inline double value(const Dual2& a) { return a.v; }

inline Dual2 sin(const Dual2& a) {
  const double s = std::sin(a.v);
  return chain(a, s, std::cos(a.v), -s);
}
inline Dual2 cos(const Dual2& a) {
  const double c = std::cos(a.v);
  return chain(a, c, -std::sin(a.v), -c);
}
inline Dual2 exp(const Dual2& a) {
  const double e = std::exp(a.v);
  return chain(a, e, e, e);
}
inline Dual2 sqrt(const Dual2& a) {
  const double s = std::sqrt(a.v);
  const double fp = 0.5 / s;
  return chain(a, s, fp, -0.5 * fp / a.v);
}

// defined with the scalar special functions
Dual2 normal_pdf(const Dual2& a);
Dual2 normal_cdf(const Dual2& a);

}  // namespace rcito::fad2
