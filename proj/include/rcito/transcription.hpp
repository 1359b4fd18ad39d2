#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "rcito/model.hpp"
#include "rcito/nlp.hpp"
#include "rcito/stochastic.hpp"

// Direct transcription of contact-implicit trajectory optimization: per-knot
// states, controls, contact forces, and sliding slacks tied together by
// discretized dynamics and complementarity constraint groups, with
// configurable handling of the complementarity products (relaxed, penalized,
// chance-bounded) and an optional expected-residual cost term.
namespace rcito {

enum class ContactMode { kStrictRelaxed, kExactPenalty, kChance };
enum class TimestepMode { kFixed, kBoundedVariable };

// Expected-residual cost augmentation on the uncertain constraint group.
struct ErmSettings {
  double alpha = 1e3;            // cost weight
  bool replaces_product = false; // drop the uncertain group's product row
};

struct ProblemSpec {
  SystemModel model;
  int knot_count = 2;  // K
  double horizon = 1.0;
  Eigen::VectorXd x0, xF;        // boundary states, nq+nv each
  Eigen::VectorXd q_weights;     // state-cost diagonal, nq+nv
  Eigen::VectorXd r_weights;     // control-cost diagonal, nu

  ContactMode contact_mode = ContactMode::kStrictRelaxed;
  // Product-row relaxation used by this transcription; the homotopy driver
  // rebuilds with successive entries of epsilon_schedule.
  double epsilon = 0.0;
  std::vector<double> epsilon_schedule = {1.0, 1e-1, 1e-2, 1e-4, 1e-6};
  double penalty_rho = 1e4;      // exact-penalty weight on the products
  ChanceParams chance;           // chance-mode risk levels
  std::optional<UncertaintySpec> uncertainty;
  std::optional<ErmSettings> erm;
  TimestepMode timestep_mode = TimestepMode::kFixed;

  double nominal_h() const { return horizon / (knot_count - 1); }
  int state_dim() const { return model.state_dim(); }
};

// Throws std::invalid_argument on malformed specs (dimension mismatches,
// chance or ERM without an UncertaintySpec, bad weights).
void validate(const ProblemSpec& spec);

// Flat variable vector layout.  Per knot: q, v, u, then per contact
// [lambda_N, lambda_T+, lambda_T-, gamma]; bounded-variable timesteps append
// one h per interval at the tail.
struct VariableLayout {
  int nq = 0, nv = 0, nu = 0, nc = 0, K = 0;
  bool variable_h = false;
  int knot_stride = 0;
  int total = 0;

  static VariableLayout from_spec(const ProblemSpec& spec);

  int q_offset(int k) const { return k * knot_stride; }
  int v_offset(int k) const { return k * knot_stride + nq; }
  int u_offset(int k) const { return k * knot_stride + nq + nv; }
  int contact_offset(int k, int c) const {
    return k * knot_stride + nq + nv + nu + 4 * c;
  }
  int lambda_n_offset(int k, int c) const { return contact_offset(k, c); }
  int lambda_t_offset(int k, int c, int dir) const {
    return contact_offset(k, c) + 1 + dir;  // dir 0 = +x, 1 = -x
  }
  int gamma_offset(int k, int c) const { return contact_offset(k, c) + 3; }
  int h_offset(int interval) const { return K * knot_stride + interval; }
};

struct SolutionTrajectory {
  int knot_count = 0;
  Eigen::MatrixXd q, v, u;   // K x nq, K x nv, K x nu
  Eigen::MatrixXd lambda_n;  // K x nc
  Eigen::MatrixXd lambda_t;  // K x 2nc, +x then -x per contact
  Eigen::MatrixXd gamma;     // K x nc
  Eigen::VectorXd h;         // K-1 interval lengths
  std::string status;
  int iterations = 0;
  double cost = 0.0;
  double merit = 0.0;
};

class TranscribedNlp : public NlpProblem {
 public:
  TranscribedNlp(const ProblemSpec& spec, int threads);

  int num_vars() const override { return layout_.total; }
  int num_eq() const override { return num_eq_; }
  int num_ineq() const override { return num_ineq_; }
  const Eigen::VectorXd& lower_bound() const override { return lower_; }
  const Eigen::VectorXd& upper_bound() const override { return upper_; }

  void eval(const Eigen::VectorXd& x, double& cost, Eigen::VectorXd& eq,
            Eigen::VectorXd& ineq) const override;
  void init_derivatives(NlpDerivatives& d) const override;
  void eval_with_derivatives(const Eigen::VectorXd& x, double& cost,
                             Eigen::VectorXd& eq, Eigen::VectorXd& ineq,
                             NlpDerivatives& d) const override;
  bool weighted_hessian(const Eigen::VectorXd& x, double cost_scale,
                        const Eigen::VectorXd& w_eq,
                        const Eigen::VectorXd& w_ineq,
                        std::vector<HessianEntry>& out) const override;
  std::string row_block_name(bool is_equality, int row) const override;

  const ProblemSpec& spec() const { return spec_; }
  const VariableLayout& layout() const { return layout_; }
  // Inequality rows emitted per knot (same for every knot).
  int ineq_rows_per_knot() const { return ineq_rows_per_knot_; }

  // Precomputed recipe for the per-knot complementarity rows and the
  // product/expected-residual cost terms.  Chance offsets are folded into
  // per-unit coefficients so the row kernels stay branch-light.
  struct GroupConfig {
    double friction_mean = 0.5;  // expected mu in the cone residual
    bool distance_uncertain = false;
    bool friction_uncertain = false;
    double scale = 1.0;          // distance-residual premultiplier
    double dist_mean = 0.0;      // expected terrain offset
    double sigma_distance = 0.0; // scale * sigma (distance target)
    double sigma_friction = 0.0; // sigma (friction target)
    bool chance_distance = false;
    bool chance_friction = false;
    double d_lower = 0.0;        // distance F-row offset
    double d_upper_coeff = 0.0;  // distance product bound per unit lambda_N
    double c_lower_coeff = 0.0;  // cone F-row offset per unit lambda_N
    double c_upper_coeff = 0.0;  // cone product bound per unit lambda_N*gamma
    bool has_d2 = true, has_s2 = true, has_c2 = true;  // product rows present
    bool pen_d = false, pen_s = false, pen_c = false;  // products in cost
    double penalty_rho = 0.0;
    bool erm_on = false;
    double erm_alpha = 0.0;
    double epsilon = 0.0;
  };

 private:
  void build_rows();

  ProblemSpec spec_;
  VariableLayout layout_;
  GroupConfig group_;
  int threads_ = 1;
  int num_eq_ = 0;
  int num_ineq_ = 0;
  int ineq_rows_per_knot_ = 0;
  int rows_per_contact_ = 0;
  Eigen::VectorXd lower_, upper_;
  std::vector<std::vector<int>> eq_row_cols_, ineq_row_cols_;
};

// Builds the NLP; threads > 1 evaluates independent knots/intervals with
// OpenMP (identical results to the serial path, which remains the reference).
TranscribedNlp transcribe(const ProblemSpec& spec, int threads = 1);

SolutionTrajectory unpack_solution(const ProblemSpec& spec,
                                   const Eigen::VectorXd& x);
Eigen::VectorXd pack_solution(const ProblemSpec& spec,
                              const SolutionTrajectory& traj);

}  // namespace rcito
