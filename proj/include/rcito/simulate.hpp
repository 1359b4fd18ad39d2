#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <vector>

#include "rcito/model.hpp"

namespace rcito {

// Fixed-step rollout settings. The terrain the stepper sees can be shifted
// vertically and given a friction coefficient different from what a plan
// assumed; the perturbation studies exploit exactly that.
struct SimConfig {
  double h_sim = 0.01;
  double duration = 1.0;
  double mu = 0.5;
  double terrain_offset = 0.0;
  int lcp_iterations = 500;
  double lcp_tolerance = 1e-10;
  double target_position = 0.0;

  int num_steps() const;
};

// One velocity-impulse step: the next state plus the impulses that produced
// it, one (normal, signed tangential) pair per contact.
struct StepResult {
  Eigen::VectorXd x;
  Eigen::MatrixXd impulses;  // nc x 2
  int sweeps = 0;
  double residual = 0.0;
};

struct SimResult {
  Eigen::MatrixXd states;    // (steps + 1) x (nq + nv), row 0 is the start
  Eigen::MatrixXd impulses;  // (steps + 1) x (2 nc), row n made state n
  double final_error = 0.0;  // signed horizontal miss against the target
  double penetration_max = 0.0;
};

struct PerturbationResult {
  std::vector<double> mu_values;
  Eigen::VectorXd errors;  // signed final error per friction value
  double mean = 0.0;
  double range = 0.0;  // max minus min error
};

StepResult step(const SystemModel& model, const Eigen::VectorXd& x,
                const Eigen::VectorXd& u, const SimConfig& cfg);

// controls holds one row per simulation step; extra rows are ignored.
SimResult rollout(const SystemModel& model, const Eigen::VectorXd& x0,
                  const Eigen::MatrixXd& controls, const SimConfig& cfg);

// Zero-order hold of knot controls onto simulation steps. The control
// attached to a knot acts over the interval that ends at that knot, so the
// step whose midpoint falls in interval k receives row k + 1.
Eigen::MatrixXd resample_controls(const Eigen::MatrixXd& knot_controls,
                                  double horizon, const SimConfig& cfg);

// Replays one control tape against several friction coefficients and
// collects the signed final errors. Rollouts run in parallel.
PerturbationResult perturbation_study(const SystemModel& model,
                                      const Eigen::VectorXd& x0,
                                      const Eigen::MatrixXd& controls,
                                      const std::vector<double>& mu_values,
                                      const SimConfig& cfg);

void write_trace_csv(std::ostream& out, const SimResult& result,
                     const SystemModel& model, const SimConfig& cfg);

}  // namespace rcito
