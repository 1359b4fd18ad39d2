#pragma once

#include <Eigen/Core>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rcito/fad.hpp"
#include "rcito/special_functions.hpp"

// Gaussian-uncertainty treatment of complementarity pairs (z, F) with
// F ~ N(m_f, sigma^2): the expected residual of min(z, F) in closed form,
// and probabilistic bounds that relax the product condition z*F = 0.
namespace rcito {

// Which contact parameter carries the uncertainty.
struct UncertaintySpec {
  enum class Target { kDistance, kFriction };
  Target target = Target::kDistance;
  // Expected value: terrain height offset (m) for distance, friction
  // coefficient for friction.
  double mean = 0.0;
  // Standard deviation in the target's natural units.
  double sigma = 0.0;
  // Distance residuals and their sigma are premultiplied by this factor
  // before expected-residual or chance evaluation.
  double scale = 1.0;
};

// Probability levels for the chance relaxation.  theta bounds
// P(F <= upper) and beta bounds P(F >= lower); the relaxed region is
// nonempty in the interior only when beta > 1 - theta, and values >= 0.5
// are the useful range.
struct ChanceParams {
  double theta = 0.5;
  double beta = 0.5;
};

struct ComplementarityTriple {
  double z = 0.0;
  double m_f = 0.0;
  double sigma = 0.0;
};

// E[min(z, F)^2] for F ~ N(m_f, sigma^2).  Smoothly extends the
// deterministic residual min(z, m_f)^2, which it equals at sigma = 0.
template <class T>
T erm_min_residual(const T& z, const T& m_f, const T& sigma) {
  using fad::min;
  using fad::value;
  if (value(sigma) < 0.0) {
    throw std::domain_error("erm_min_residual: sigma must be nonnegative");
  }
  if (value(sigma) < 1e-300) {
    const T r = min(z, m_f);
    return r * r;
  }
  const T alpha = (z - m_f) / sigma;
  const T cdf = normal_cdf(alpha);
  const T pdf = normal_pdf(alpha);
  return z * z * (1.0 - cdf) + (m_f * m_f + sigma * sigma) * cdf -
         sigma * (z + m_f) * pdf;
}

double erm_min_residual(double z, double m_f, double sigma);

// Lower admissible value of m_f: guarantees P(F >= 0) >= beta... the bound
// -sqrt(2)*sigma*erf_inv(2*beta - 1), which is 0 at beta = 0.5 and recovers
// the strict condition m_f >= 0 there.
double chance_lower_bound(double sigma, double beta);

// Upper admissible value of z*m_f: -sqrt(2)*z*sigma*erf_inv(1 - 2*theta).
// Nonnegative for theta >= 0.5 and z >= 0; zero at theta = 0.5.
double chance_upper_bound(double sigma, double theta, double z);

// Whether a triple satisfies z >= 0, the lower bound on m_f, and the upper
// bound on z*m_f.
bool chance_feasible(const ComplementarityTriple& t, const ChanceParams& p);

// Mean squared constraint defect over knots: (1/K) * sum_k of
// ||eq_k||^2 + ||min(0, ineq_k)||^2.  Either list may be empty when no rows
// of that kind exist; nonempty lists must have K entries.
double merit_score(const std::vector<Eigen::VectorXd>& eq_knots,
                   const std::vector<Eigen::VectorXd>& ineq_knots, int knot_count);

}  // namespace rcito
