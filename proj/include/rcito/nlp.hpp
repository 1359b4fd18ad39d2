#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "rcito/sparse.hpp"

namespace rcito {

// One coefficient of a symmetric Hessian; duplicates accumulate.
struct HessianEntry {
  int row;
  int col;
  double value;
};

// Derivative workspace with fixed sparsity; init once, refill per evaluation.
struct NlpDerivatives {
  Eigen::VectorXd cost_grad;
  CsrMatrix jac_eq;    // d(equalities)/dx
  CsrMatrix jac_ineq;  // d(inequalities)/dx
};

// Box-constrained NLP: minimize f(x) subject to eq(x) = 0, ineq(x) >= 0,
// lower <= x <= upper.  Implementations must be immutable after construction
// and concurrently callable; all mutable state lives in caller workspaces.
class NlpProblem {
 public:
  virtual ~NlpProblem() = default;

  virtual int num_vars() const = 0;
  virtual int num_eq() const = 0;
  virtual int num_ineq() const = 0;
  virtual const Eigen::VectorXd& lower_bound() const = 0;
  virtual const Eigen::VectorXd& upper_bound() const = 0;

  virtual void eval(const Eigen::VectorXd& x, double& cost,
                    Eigen::VectorXd& eq, Eigen::VectorXd& ineq) const = 0;

  // Fills patterns so eval_with_derivatives can write values in place.
  virtual void init_derivatives(NlpDerivatives& d) const = 0;
  virtual void eval_with_derivatives(const Eigen::VectorXd& x, double& cost,
                                     Eigen::VectorXd& eq, Eigen::VectorXd& ineq,
                                     NlpDerivatives& d) const = 0;

  // Hessian of cost_scale * f + sum_i w_eq[i] * eq_i + sum_i w_ineq[i] *
  // ineq_i, emitted as symmetric triplets (both triangles, duplicates add).
  // Returns false when second derivatives are unavailable; callers must then
  // fall back to a first-order model.
  virtual bool weighted_hessian(const Eigen::VectorXd& /*x*/,
                                double /*cost_scale*/,
                                const Eigen::VectorXd& /*w_eq*/,
                                const Eigen::VectorXd& /*w_ineq*/,
                                std::vector<HessianEntry>& out) const {
    out.clear();
    return false;
  }

  // Human-readable name of the block a constraint row belongs to, used in
  // non-finite-value diagnostics.
  virtual std::string row_block_name(bool is_equality, int row) const {
    return (is_equality ? "equality row " : "inequality row ") +
           std::to_string(row);
  }
};

}  // namespace rcito
