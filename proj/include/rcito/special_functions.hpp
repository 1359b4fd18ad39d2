#pragma once

#include "rcito/fad.hpp"

// Error function, its inverse, and Gaussian helpers.  Implemented in-repo so
// that results are reproducible bit-for-bit across platforms regardless of
// the host libm.
namespace rcito {

// Error function, accurate to ~1e-15 absolute.  Power series for small
// arguments, a continued fraction for the complementary function otherwise.
double erf(double x);

// Complementary error function with the same accuracy contract.
double erfc(double x);

// Inverse of erf on (-1, 1).  Polynomial initializer refined by Newton steps
// on erf until the residual reaches machine precision.  Throws
// std::domain_error outside the open interval.
double erf_inv(double p);

// Standard normal density and cumulative distribution.
double normal_pdf(double x);
double normal_cdf(double x);

// Derivative-propagating overloads.  The value path is the scalar
// implementation; tangents use the exact analytic derivatives.
fad::Dual erf(const fad::Dual& x);
fad::Dual normal_pdf(const fad::Dual& x);
fad::Dual normal_cdf(const fad::Dual& x);

}  // namespace rcito
