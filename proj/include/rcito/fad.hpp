#pragma once

#include <array>
#include <cassert>
#include <cmath>

// Forward-mode automatic differentiation on dual numbers with an inline
// tangent vector.  One evaluation context fixes the tangent width for every
// dual it creates; the width is thread-local so parallel evaluations over
// disjoint data do not interfere.
namespace rcito::fad {

inline constexpr int kTangentCapacity = 64;

namespace detail {
inline thread_local int g_width = 0;
}

// Sets the active tangent width for the current thread while in scope.
class ScopedWidth {
 public:
  explicit ScopedWidth(int n) : prev_(detail::g_width) {
    assert(n >= 0 && n <= kTangentCapacity);
    detail::g_width = n;
  }
  ~ScopedWidth() { detail::g_width = prev_; }
  ScopedWidth(const ScopedWidth&) = delete;
  ScopedWidth& operator=(const ScopedWidth&) = delete;

 private:
  int prev_;
};

inline int width() { return detail::g_width; }

struct Dual {
  double v;
  std::array<double, kTangentCapacity> d;

  Dual() : v(0.0) { zero_tangent(); }
  Dual(double value) : v(value) { zero_tangent(); }  // NOLINT: implicit by design

  void zero_tangent() {
    const int n = width();
    for (int i = 0; i < n; ++i) d[i] = 0.0;
  }

  // Makes this dual the seed of variable `slot` in the active tangent basis.
  void seed(int slot) {
    assert(slot >= 0 && slot < width());
    d[slot] = 1.0;
  }

  Dual& operator+=(const Dual& o) {
    const int n = width();
    v += o.v;
    for (int i = 0; i < n; ++i) d[i] += o.d[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    const int n = width();
    v -= o.v;
    for (int i = 0; i < n; ++i) d[i] -= o.d[i];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    const int n = width();
    for (int i = 0; i < n; ++i) d[i] = d[i] * o.v + v * o.d[i];
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const int n = width();
    const double inv = 1.0 / o.v;
    for (int i = 0; i < n; ++i) d[i] = (d[i] - v * inv * o.d[i]) * inv;
    v *= inv;
    return *this;
  }
  Dual& operator+=(double c) { v += c; return *this; }
  Dual& operator-=(double c) { v -= c; return *this; }
  Dual& operator*=(double c) {
    const int n = width();
    v *= c;
    for (int i = 0; i < n; ++i) d[i] *= c;
    return *this;
  }
  Dual& operator/=(double c) { return (*this) *= (1.0 / c); }
};

inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(Dual a, const Dual& b) { return a /= b; }
inline Dual operator+(Dual a, double b) { return a += b; }
inline Dual operator-(Dual a, double b) { return a -= b; }
inline Dual operator*(Dual a, double b) { return a *= b; }
inline Dual operator/(Dual a, double b) { return a /= b; }
inline Dual operator+(double a, Dual b) { return b += a; }
inline Dual operator*(double a, Dual b) { return b *= a; }
inline Dual operator-(double a, const Dual& b) {
  Dual r(a);
  return r -= b;
}
inline Dual operator/(double a, const Dual& b) {
  Dual r(a);
  return r /= b;
}
inline Dual operator-(const Dual& a) {
  Dual r(a);
  return r *= -1.0;
}
inline Dual operator+(const Dual& a) { return a; }

inline bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
inline bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }
inline bool operator<=(const Dual& a, const Dual& b) { return a.v <= b.v; }
inline bool operator>=(const Dual& a, const Dual& b) { return a.v >= b.v; }
inline bool operator<(const Dual& a, double b) { return a.v < b; }
inline bool operator>(const Dual& a, double b) { return a.v > b; }
inline bool operator<=(const Dual& a, double b) { return a.v <= b; }
inline bool operator>=(const Dual& a, double b) { return a.v >= b; }
inline bool operator<(double a, const Dual& b) { return a < b.v; }
inline bool operator>(double a, const Dual& b) { return a > b.v; }

// Applies d/dx f at a.v with known f value and derivative (chain rule).
inline Dual unary(const Dual& a, double value, double slope) {
  Dual r;
  r.v = value;
  const int n = width();
  for (int i = 0; i < n; ++i) r.d[i] = slope * a.d[i];
  return r;
}

inline Dual sin(const Dual& a) { return unary(a, std::sin(a.v), std::cos(a.v)); }
inline Dual cos(const Dual& a) { return unary(a, std::cos(a.v), -std::sin(a.v)); }
inline Dual exp(const Dual& a) {
  const double e = std::exp(a.v);
  return unary(a, e, e);
}
inline Dual sqrt(const Dual& a) {
  const double s = std::sqrt(a.v);
  return unary(a, s, 0.5 / s);
}
inline Dual abs(const Dual& a) { return a.v < 0.0 ? -a : a; }
inline const Dual& min(const Dual& a, const Dual& b) { return a.v <= b.v ? a : b; }
inline const Dual& max(const Dual& a, const Dual& b) { return a.v >= b.v ? a : b; }

inline double value(const Dual& a) { return a.v; }
inline double value(double a) { return a; }

using std::abs;
using std::cos;
using std::exp;
using std::max;
using std::min;
using std::sin;
using std::sqrt;

}  // namespace rcito::fad
