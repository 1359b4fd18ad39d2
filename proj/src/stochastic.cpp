#include "rcito/stochastic.hpp"

#include <cmath>
#include <stdexcept>

namespace rcito {

namespace {
constexpr double kSqrt2 = 1.4142135623730950488016887242;
}

double erm_min_residual(double z, double m_f, double sigma) {
  return erm_min_residual<double>(z, m_f, sigma);
}

double chance_lower_bound(double sigma, double beta) {
  return -kSqrt2 * sigma * erf_inv(2.0 * beta - 1.0);
}

double chance_upper_bound(double sigma, double theta, double z) {
  return -kSqrt2 * z * sigma * erf_inv(1.0 - 2.0 * theta);
}

bool chance_feasible(const ComplementarityTriple& t, const ChanceParams& p) {
  if (t.z < 0.0) return false;
  if (t.m_f < chance_lower_bound(t.sigma, p.beta)) return false;
  return t.z * t.m_f <= chance_upper_bound(t.sigma, p.theta, t.z);
}

double merit_score(const std::vector<Eigen::VectorXd>& eq_knots,
                   const std::vector<Eigen::VectorXd>& ineq_knots,
                   int knot_count) {
  if (knot_count < 1) throw std::invalid_argument("merit_score: K must be >= 1");
  const auto check = [&](const std::vector<Eigen::VectorXd>& v) {
    if (!v.empty() && v.size() != static_cast<size_t>(knot_count)) {
      throw std::invalid_argument("merit_score: knot count mismatch");
    }
  };
  check(eq_knots);
  check(ineq_knots);
  double total = 0.0;
  for (const auto& r : eq_knots) total += r.squaredNorm();
  for (const auto& r : ineq_knots) {
    total += r.cwiseMin(0.0).squaredNorm();
  }
  return total / static_cast<double>(knot_count);
}

}  // namespace rcito
