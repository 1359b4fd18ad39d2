#include "rcito/simulate.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rcito {
namespace {

void check_config(const SimConfig& cfg) {
  if (!(cfg.h_sim > 0.0) || !(cfg.duration > 0.0)) {
    throw std::invalid_argument("simulate: step and duration must be positive");
  }
  if (!(cfg.mu >= 0.0)) {
    throw std::invalid_argument("simulate: friction must be nonnegative");
  }
  if (cfg.lcp_iterations < 1 || !(cfg.lcp_tolerance > 0.0)) {
    throw std::invalid_argument("simulate: contact solve settings malformed");
  }
}

// Residual of the stepped complementarity system: the min form for the
// normal impulses and the natural map for the box-clamped friction.
double contact_residual(const Eigen::VectorXd& gap_rate,
                        const Eigen::VectorXd& slip, const Eigen::VectorXd& pn,
                        const Eigen::VectorXd& pt, double mu) {
  double r = 0.0;
  for (int c = 0; c < pn.size(); ++c) {
    r = std::max(r, std::abs(std::min(pn[c], gap_rate[c])));
    const double lim = mu * pn[c];
    const double back = std::clamp(pt[c] - slip[c], -lim, lim);
    r = std::max(r, std::abs(pt[c] - back));
  }
  return r;
}

}  // namespace

int SimConfig::num_steps() const {
  return static_cast<int>(std::llround(duration / h_sim));
}

StepResult step(const SystemModel& model, const Eigen::VectorXd& x,
                const Eigen::VectorXd& u, const SimConfig& cfg) {
  check_config(cfg);
  if (x.size() != model.state_dim()) {
    throw std::invalid_argument("simulate: state length mismatch");
  }
  if (u.size() != model.nu) {
    throw std::invalid_argument("simulate: control length mismatch");
  }
  const int nv = model.nv;
  const int nc = model.num_contacts();
  const double h = cfg.h_sim;
  const Eigen::VectorXd q = x.head(model.nq);
  const Eigen::VectorXd v = x.tail(nv);

  const auto mass = mass_matrix(model, q).ldlt();
  const Eigen::VectorXd v_free =
      v + h * mass.solve(control_matrix(model) * u - bias_forces(model, q, v));

  Eigen::VectorXd pn = Eigen::VectorXd::Zero(nc);
  Eigen::VectorXd pt = Eigen::VectorXd::Zero(nc);
  Eigen::VectorXd v_plus = v_free;
  Eigen::MatrixXd jn(nc, nv), jt(nc, nv);
  Eigen::VectorXd c0(nc), ann(nc), att(nc);
  StepResult out;

  // The gaps the impulses must keep nonnegative are the ones at the end of
  // the step, so the contact geometry is re-linearized at the predicted
  // endpoint until the post-step velocity settles. Linear gaps settle after
  // one pass; the articulated model needs the extra passes to keep landing
  // feet from sinking by the curvature error of a start-of-step Jacobian.
  for (int pass = 0; pass < 8; ++pass) {
    const Eigen::VectorXd q_pred = q + h * v_plus;
    const std::vector<ContactKinematics> kin = contact_kinematics(model, q_pred);
    for (int c = 0; c < nc; ++c) {
      jn.row(c) = kin[c].j_n;
      jt.row(c) = kin[c].j_t.row(0);
      c0[c] = kin[c].phi - cfg.terrain_offset - h * jn.row(c).dot(v_plus);
    }
    const Eigen::MatrixXd win = mass.solve(jn.transpose());
    const Eigen::MatrixXd wit = mass.solve(jt.transpose());
    for (int c = 0; c < nc; ++c) {
      ann[c] = std::max(jn.row(c).dot(win.col(c)), 1e-14);
      att[c] = std::max(jt.row(c).dot(wit.col(c)), 1e-14);
    }
    // push the impulses found so far through the refreshed Jacobian
    v_plus = v_free + win * pn + wit * pt;

    bool solved = false;
    for (int it = 0; it < cfg.lcp_iterations && !solved; ++it) {
      for (int c = 0; c < nc; ++c) {
        const double gap_rate = c0[c] / h + jn.row(c).dot(v_plus);
        const double pn_new = std::max(0.0, pn[c] - gap_rate / ann[c]);
        v_plus += win.col(c) * (pn_new - pn[c]);
        pn[c] = pn_new;
        const double slip = jt.row(c).dot(v_plus);
        const double lim = cfg.mu * pn[c];
        const double pt_new = std::clamp(pt[c] - slip / att[c], -lim, lim);
        v_plus += wit.col(c) * (pt_new - pt[c]);
        pt[c] = pt_new;
      }
      ++out.sweeps;
      out.residual = contact_residual(c0 / h + jn * v_plus, jt * v_plus, pn,
                                      pt, cfg.mu);
      solved = out.residual <= cfg.lcp_tolerance;
    }
    if (!solved) {
      std::ostringstream msg;
      msg << "simulate: contact solve stopped at residual " << out.residual
          << " after " << cfg.lcp_iterations << " sweeps";
      throw std::runtime_error(msg.str());
    }
    const Eigen::VectorXd q_new = q + h * v_plus;
    if ((q_new - q_pred).lpNorm<Eigen::Infinity>() <=
        1e-12 * (1.0 + q_new.lpNorm<Eigen::Infinity>())) {
      break;
    }
  }

  out.x.resize(x.size());
  out.x.head(model.nq) = q + h * v_plus;
  out.x.tail(nv) = v_plus;
  out.impulses.resize(nc, 2);
  out.impulses.col(0) = pn;
  out.impulses.col(1) = pt;
  return out;
}

SimResult rollout(const SystemModel& model, const Eigen::VectorXd& x0,
                  const Eigen::MatrixXd& controls, const SimConfig& cfg) {
  check_config(cfg);
  if (x0.size() != model.state_dim()) {
    throw std::invalid_argument("simulate: state length mismatch");
  }
  const int steps = cfg.num_steps();
  if (controls.rows() < steps || controls.cols() != model.nu) {
    throw std::invalid_argument("simulate: control tape shape mismatch");
  }
  const int nc = model.num_contacts();

  SimResult res;
  res.states.resize(steps + 1, model.state_dim());
  res.impulses = Eigen::MatrixXd::Zero(steps + 1, 2 * nc);
  res.states.row(0) = x0;

  Eigen::VectorXd x = x0;
  auto track_penetration = [&](const Eigen::VectorXd& state) {
    const std::vector<ContactKinematics> kin =
        contact_kinematics(model, state.head(model.nq));
    for (const ContactKinematics& k : kin) {
      res.penetration_max =
          std::max(res.penetration_max, cfg.terrain_offset - k.phi);
    }
  };
  track_penetration(x);
  for (int i = 0; i < steps; ++i) {
    StepResult s = step(model, x, controls.row(i), cfg);
    x = s.x;
    res.states.row(i + 1) = x;
    for (int c = 0; c < nc; ++c) {
      res.impulses(i + 1, 2 * c) = s.impulses(c, 0);
      res.impulses(i + 1, 2 * c + 1) = s.impulses(c, 1);
    }
    track_penetration(x);
  }
  res.final_error = x[0] - cfg.target_position;
  return res;
}

Eigen::MatrixXd resample_controls(const Eigen::MatrixXd& knot_controls,
                                  double horizon, const SimConfig& cfg) {
  check_config(cfg);
  if (knot_controls.rows() < 2 || !(horizon > 0.0)) {
    throw std::invalid_argument("simulate: knot tape needs two knots");
  }
  const int intervals = static_cast<int>(knot_controls.rows()) - 1;
  const double h_knot = horizon / intervals;
  const int steps = cfg.num_steps();
  Eigen::MatrixXd out(steps, knot_controls.cols());
  for (int i = 0; i < steps; ++i) {
    const double mid = (i + 0.5) * cfg.h_sim;
    const int k = std::clamp(static_cast<int>(mid / h_knot), 0, intervals - 1);
    out.row(i) = knot_controls.row(k + 1);
  }
  return out;
}

PerturbationResult perturbation_study(const SystemModel& model,
                                      const Eigen::VectorXd& x0,
                                      const Eigen::MatrixXd& controls,
                                      const std::vector<double>& mu_values,
                                      const SimConfig& cfg) {
  if (mu_values.empty()) {
    throw std::invalid_argument("simulate: empty friction set");
  }
  const int m = static_cast<int>(mu_values.size());
  PerturbationResult res;
  res.mu_values = mu_values;
  res.errors.resize(m);
  std::string failure;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    try {
      SimConfig local = cfg;
      local.mu = mu_values[i];
      res.errors[i] = rollout(model, x0, controls, local).final_error;
    } catch (const std::exception& e) {
#pragma omp critical
      failure = e.what();
    }
  }
  if (!failure.empty()) throw std::runtime_error(failure);
  res.mean = res.errors.mean();
  res.range = res.errors.maxCoeff() - res.errors.minCoeff();
  return res;
}

void write_trace_csv(std::ostream& out, const SimResult& result,
                     const SystemModel& model, const SimConfig& cfg) {
  out << "time";
  for (int i = 0; i < model.nq; ++i) out << ",q" << i;
  for (int i = 0; i < model.nv; ++i) out << ",v" << i;
  for (int c = 0; c < model.num_contacts(); ++c) {
    out << ",pn" << c << ",pt" << c;
  }
  out << "\n";
  out << std::setprecision(17);
  for (int i = 0; i < result.states.rows(); ++i) {
    out << i * cfg.h_sim;
    for (int j = 0; j < result.states.cols(); ++j) {
      out << "," << result.states(i, j);
    }
    for (int j = 0; j < result.impulses.cols(); ++j) {
      out << "," << result.impulses(i, j);
    }
    out << "\n";
  }
}

}  // namespace rcito
