#include "rcito/special_functions.hpp"

#include "rcito/fad2.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace rcito {
namespace {

constexpr double kTwoOverSqrtPi = 1.1283791670955125738961589031;
constexpr double kInvSqrtPi = 0.5641895835477562869480794516;
constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599;
constexpr double kInvSqrt2 = 0.7071067811865475244008443621;

// erf(x) = 2/sqrt(pi) * x * exp(-x^2) * sum_n (2x^2)^n / (1*3*...*(2n+1)).
// All terms positive, so no cancellation.  Rounding accumulates with the
// sum's magnitude (~ exp(x^2)), so the series is only used for |x| <= 2.
double erf_series(double x) {
  const double x2 = x * x;
  double term = 1.0;
  double sum = 1.0;
  double denom = 1.0;
  for (int n = 1; n < 200; ++n) {
    denom += 2.0;
    term *= 2.0 * x2 / denom;
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return kTwoOverSqrtPi * x * std::exp(-x2) * sum;
}

// erfc(x) = exp(-x^2)/(x*sqrt(pi)) * 1/(1 + q1/(1 + q2/(1 + ...))) with
// q_n = n/(2x^2), evaluated by the modified Lentz algorithm.  Used for x > 2.
double erfc_fraction(double x) {
  const double half_inv_x2 = 0.5 / (x * x);
  const double tiny = 1e-300;
  double f = 1.0;  // leading b0 term; c starts at f per modified Lentz
  double c = f;
  double d = 0.0;
  for (int n = 1; n < 300; ++n) {
    const double q = n * half_inv_x2;
    d = 1.0 + q * d;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    c = 1.0 + q / c;
    if (std::abs(c) < tiny) c = tiny;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x * x) * kInvSqrtPi / (x * f);
}

// Polynomial initial guess for erf_inv, float-grade accuracy; always
// followed by Newton refinement in double.
double erf_inv_guess(double p) {
  double w = -std::log((1.0 - p) * (1.0 + p));
  if (w < 5.0) {
    w -= 2.5;
    double q = 2.81022636e-08;
    q = 3.43273939e-07 + q * w;
    q = -3.5233877e-06 + q * w;
    q = -4.39150654e-06 + q * w;
    q = 0.00021858087 + q * w;
    q = -0.00125372503 + q * w;
    q = -0.00417768164 + q * w;
    q = 0.246640727 + q * w;
    q = 1.50140941 + q * w;
    return q * p;
  }
  w = std::sqrt(w) - 3.0;
  double q = -0.000200214257;
  q = 0.000100950558 + q * w;
  q = 0.00134934322 + q * w;
  q = -0.00367342844 + q * w;
  q = 0.00573950773 + q * w;
  q = -0.0076224613 + q * w;
  q = 0.00943887047 + q * w;
  q = 1.00167406 + q * w;
  q = 2.83297682 + q * w;
  return q * p;
}

}  // namespace

double erf(double x) {
  if (std::isnan(x)) return x;
  const double ax = std::abs(x);
  if (ax <= 2.0) return erf_series(x);
  if (ax > 6.5) return x > 0.0 ? 1.0 : -1.0;
  const double tail = erfc_fraction(ax);
  return x > 0.0 ? 1.0 - tail : tail - 1.0;
}

double erfc(double x) {
  if (x > 2.0) return x > 27.0 ? 0.0 : erfc_fraction(x);
  if (x < -2.0) return 2.0 - erfc(-x);
  return 1.0 - erf_series(x);
}

double erf_inv(double p) {
  if (!(p > -1.0 && p < 1.0)) {
    throw std::domain_error("erf_inv: argument must lie in (-1, 1)");
  }
  if (p == 0.0) return 0.0;
  double y = erf_inv_guess(p);
  for (int it = 0; it < 60; ++it) {
    const double r = erf(y) - p;
    const double step = r * std::exp(y * y) / kTwoOverSqrtPi;
    y -= step;
    if (std::abs(step) <= 1e-16 * (1.0 + std::abs(y))) break;
  }
  return y;
}

double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double normal_cdf(double x) { return 0.5 * erfc(-x * kInvSqrt2); }

fad::Dual erf(const fad::Dual& x) {
  return fad::unary(x, erf(x.v), kTwoOverSqrtPi * std::exp(-x.v * x.v));
}

fad::Dual normal_pdf(const fad::Dual& x) {
  const double p = normal_pdf(x.v);
  return fad::unary(x, p, -x.v * p);
}

fad::Dual normal_cdf(const fad::Dual& x) {
  return fad::unary(x, normal_cdf(x.v), normal_pdf(x.v));
}

namespace fad2 {

Dual2 normal_pdf(const Dual2& a) {
  const double p = rcito::normal_pdf(a.v);
  return chain(a, p, -a.v * p, (a.v * a.v - 1.0) * p);
}

Dual2 normal_cdf(const Dual2& a) {
  const double p = rcito::normal_pdf(a.v);
  return chain(a, rcito::normal_cdf(a.v), p, -a.v * p);
}

}  // namespace fad2

}  // namespace rcito
