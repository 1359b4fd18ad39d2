#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rcito/nlp.hpp"
#include "rcito/transcription.hpp"

// Augmented-Lagrangian solver for the transcribed problems: outer loop over
// equality/inequality multipliers with penalty growth, inner bound-constrained
// minimization by projected Newton steps on the augmented Lagrangian (exact
// second derivatives where the problem provides them, Gauss-Newton otherwise).
// Deterministic: identical inputs give bit-identical iterate histories.
namespace rcito {

struct SolverConfig {
  double major_feasibility_tol = 1e-6;
  double major_optimality_tol = 1e-6;
  double tight_tol = 1e-8;  // used by tightened()
  int max_major_iterations = 250;
  int max_minor_iterations = 200;  // inner descent steps per major
  double initial_penalty = 10.0;
  double penalty_growth = 10.0;   // applied when violation fails to shrink 4x
  double max_penalty = 1e12;
  int verbosity = 0;  // >= 1: tab-separated per-major log lines on stderr

  // Copy with both major tolerances tightened to tight_tol.
  SolverConfig tightened() const {
    SolverConfig c = *this;
    c.major_feasibility_tol = tight_tol;
    c.major_optimality_tol = tight_tol;
    return c;
  }
};

enum class SolveStatus { kOptimal, kFeasibleSuboptimal, kInfeasible, kIterationLimit };

const char* to_string(SolveStatus status);

// One outer (major) iteration snapshot; stage is the homotopy stage index.
struct OuterRecord {
  int stage = 0;
  int iteration = 0;
  double cost = 0.0;
  double violation = 0.0;     // max-norm constraint violation
  double stationarity = 0.0;  // projected-gradient norm of the Lagrangian
  double penalty = 0.0;
  bool accepted = false;  // multipliers were updated at this iterate
};

struct SolveResult {
  SolveStatus status = SolveStatus::kIterationLimit;
  Eigen::VectorXd x;
  // First-order multiplier estimates at the final iterate; inequality
  // multipliers are componentwise nonnegative.
  Eigen::VectorXd eq_multipliers, ineq_multipliers;
  double cost = 0.0;
  double feasibility = 0.0;
  double stationarity = 0.0;
  int major_iterations = 0;
  long function_evals = 0;
  double wall_seconds = 0.0;
  std::vector<OuterRecord> history;
  int failed_stage = -1;  // homotopy stage that failed; -1 when none
};

// Multiplier estimates and penalty carried into a chained solve; sizes must
// match the problem's row counts.
struct WarmMultipliers {
  Eigen::VectorXd eq;
  Eigen::VectorXd ineq;
  double penalty = 0.0;  // <= 0: start from the config's initial penalty
};

// start must match nlp.num_vars(); it is projected onto the variable bounds.
// Multipliers start at zero unless warm estimates are supplied.  Throws
// std::invalid_argument on malformed inputs and std::runtime_error when an
// evaluation produces NaN (the message names the constraint block).
SolveResult solve(const NlpProblem& nlp, const Eigen::VectorXd& start,
                  const SolverConfig& cfg,
                  const WarmMultipliers* warm = nullptr);

// Chained solves over a strictly decreasing relaxation schedule; each stage
// warm-starts from the previous stage's iterate, multipliers, and penalty.
// Returns the last stage's result carrying the concatenated history; a
// failing stage stops the chain and is reported in failed_stage.  Empty or
// non-decreasing schedules throw.
SolveResult homotopy_solve(
    const std::function<std::unique_ptr<NlpProblem>(double)>& factory,
    const std::vector<double>& schedule, const Eigen::VectorXd& start,
    const SolverConfig& cfg);

// Linear interpolation x0 -> xF for the states, zero controls, normal forces
// carrying the static weight split across contacts, nominal timesteps.
Eigen::VectorXd default_start(const ProblemSpec& spec);

// Re-packs a solved trajectory as the initial iterate for target_spec.
// Requires matching knot count and model dimensions; timestep variables not
// present in the source are filled with their nominal value.
Eigen::VectorXd warm_start_from(const SolutionTrajectory& solution,
                                const ProblemSpec& target_spec);

}  // namespace rcito
