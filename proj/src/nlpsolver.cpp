#include "rcito/nlpsolver.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <vector>

namespace rcito {
namespace {

Eigen::VectorXd clamp_to(const Eigen::VectorXd& x, const Eigen::VectorXd& lo,
                         const Eigen::VectorXd& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

double max_violation(const Eigen::VectorXd& eq, const Eigen::VectorXd& ineq) {
  double v = 0.0;
  if (eq.size() > 0) v = eq.cwiseAbs().maxCoeff();
  if (ineq.size() > 0) v = std::max(v, std::max(0.0, -ineq.minCoeff()));
  return v;
}

double projected_gradient_norm(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& g,
                               const Eigen::VectorXd& lo,
                               const Eigen::VectorXd& hi) {
  return (clamp_to(x - g, lo, hi) - x).lpNorm<Eigen::Infinity>();
}

[[noreturn]] void abort_nan(const NlpProblem& nlp, const Eigen::VectorXd& eq,
                            const Eigen::VectorXd& ineq, bool cost_nan,
                            bool grad_nan) {
  if (cost_nan) throw std::runtime_error("solve: NaN in objective");
  if (grad_nan) throw std::runtime_error("solve: NaN in objective gradient");
  for (int i = 0; i < eq.size(); ++i) {
    if (std::isnan(eq[i])) {
      throw std::runtime_error("solve: NaN in " + nlp.row_block_name(true, i));
    }
  }
  for (int i = 0; i < ineq.size(); ++i) {
    if (std::isnan(ineq[i])) {
      throw std::runtime_error("solve: NaN in " +
                               nlp.row_block_name(false, i));
    }
  }
  throw std::runtime_error("solve: NaN in evaluation");
}

// Augmented-Lagrangian term for g >= 0 handled by multiplier shift:
// (max(0, mu - rho g)^2 - mu^2) / (2 rho), summed.
double ineq_penalty(const Eigen::VectorXd& ineq, const Eigen::VectorXd& mu,
                    double rho) {
  double acc = 0.0;
  for (int i = 0; i < ineq.size(); ++i) {
    const double t = mu[i] - rho * ineq[i];
    acc += ((t > 0.0 ? t * t : 0.0) - mu[i] * mu[i]) / (2.0 * rho);
  }
  return acc;
}

struct AlContext {
  const NlpProblem& nlp;
  const Eigen::VectorXd& lo;
  const Eigen::VectorXd& hi;
  const Eigen::VectorXd& lam;
  const Eigen::VectorXd& mu;
  double rho = 0.0;
  long* evals = nullptr;
  int verbosity = 0;
};

double al_value(const AlContext& ctx, const Eigen::VectorXd& x,
                Eigen::VectorXd& eq, Eigen::VectorXd& ineq) {
  double cost;
  ctx.nlp.eval(x, cost, eq, ineq);
  ++*ctx.evals;
  if (std::isnan(cost) || eq.hasNaN() || ineq.hasNaN()) {
    abort_nan(ctx.nlp, eq, ineq, std::isnan(cost), false);
  }
  double L = cost;
  if (eq.size() > 0) L += ctx.lam.dot(eq) + 0.5 * ctx.rho * eq.squaredNorm();
  if (ineq.size() > 0) L += ineq_penalty(ineq, ctx.mu, ctx.rho);
  return L;
}

// Value, constraints, and the augmented-Lagrangian gradient, which equals the
// Lagrangian gradient at the first-order multiplier estimates
// lam + rho c and max(0, mu - rho g).
double al_eval(const AlContext& ctx, const Eigen::VectorXd& x,
               NlpDerivatives& d, Eigen::VectorXd& eq, Eigen::VectorXd& ineq,
               double& cost, Eigen::VectorXd& grad) {
  ctx.nlp.eval_with_derivatives(x, cost, eq, ineq, d);
  ++*ctx.evals;
  if (std::isnan(cost) || eq.hasNaN() || ineq.hasNaN() ||
      d.cost_grad.hasNaN()) {
    abort_nan(ctx.nlp, eq, ineq, std::isnan(cost), d.cost_grad.hasNaN());
  }
  double L = cost;
  grad = d.cost_grad;
  Eigen::VectorXd tmp;
  if (eq.size() > 0) {
    L += ctx.lam.dot(eq) + 0.5 * ctx.rho * eq.squaredNorm();
    const Eigen::VectorXd w = ctx.lam + ctx.rho * eq;
    d.jac_eq.transpose_multiply(w, tmp);
    grad += tmp;
  }
  if (ineq.size() > 0) {
    L += ineq_penalty(ineq, ctx.mu, ctx.rho);
    const Eigen::VectorXd w =
        (ctx.mu - ctx.rho * ineq).cwiseMax(0.0);
    d.jac_ineq.transpose_multiply(w, tmp);
    grad -= tmp;
  }
  return L;
}

Eigen::SparseMatrix<double> to_col_major(const CsrMatrix& m) {
  const Eigen::Map<const Eigen::SparseMatrix<double, Eigen::RowMajor, int>> map(
      m.rows, m.cols, static_cast<int>(m.values.size()), m.row_ptr.data(),
      m.col_idx.data(), m.values.data());
  return Eigen::SparseMatrix<double>(map);
}

// Model Hessian of the augmented Lagrangian: rho Je' Je plus rho Ji' Ji over
// the active inequality rows, plus exact cost and constraint curvature at the
// shifted multiplier estimates when the problem provides second derivatives.
// Without them a unit diagonal stands in for the missing curvature so the
// step falls back to a proximal gradient scaled by the constraint terms.
Eigen::SparseMatrix<double> al_hessian(const AlContext& ctx,
                                       const NlpDerivatives& d,
                                       const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& eq,
                                       const Eigen::VectorXd& ineq,
                                       std::vector<HessianEntry>& scratch) {
  const int n = ctx.nlp.num_vars();
  Eigen::SparseMatrix<double> h(n, n);
  Eigen::VectorXd w_ineq = Eigen::VectorXd::Zero(ineq.size());
  if (ctx.nlp.num_eq() > 0) {
    const Eigen::SparseMatrix<double> je = to_col_major(d.jac_eq);
    h = ctx.rho * Eigen::SparseMatrix<double>(je.transpose() * je);
  }
  if (ctx.nlp.num_ineq() > 0) {
    Eigen::VectorXd w(ineq.size());
    for (int i = 0; i < ineq.size(); ++i) {
      const double t = ctx.mu[i] - ctx.rho * ineq[i];
      w[i] = t > 0.0 ? ctx.rho : 0.0;
      w_ineq[i] = t > 0.0 ? -t : 0.0;
    }
    const Eigen::SparseMatrix<double> ji = to_col_major(d.jac_ineq);
    const Eigen::SparseMatrix<double> jiw = w.asDiagonal() * ji;
    h += Eigen::SparseMatrix<double>(ji.transpose() * jiw);
  }
  const Eigen::VectorXd w_eq = ctx.lam + ctx.rho * eq;
  if (ctx.nlp.weighted_hessian(x, 1.0, w_eq, w_ineq, scratch)) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(scratch.size());
    for (const HessianEntry& e : scratch) {
      trip.emplace_back(e.row, e.col, e.value);
    }
    Eigen::SparseMatrix<double> exact(n, n);
    exact.setFromTriplets(trip.begin(), trip.end());
    h += exact;
  } else {
    Eigen::SparseMatrix<double> id(n, n);
    id.setIdentity();
    h += id;
  }
  return h;
}

// How the inner loop ended: at its tolerance, at a numerical floor where no
// further progress is possible, or merely out of iterations.
enum class InnerExit { kConverged, kStalled, kIterLimit };

// Projected-Newton descent on the augmented Lagrangian over the variable box:
// bound coordinates whose gradient pushes outward are pinned, the Newton
// system is solved on the free subspace (damped until its pivots are
// positive), and the step is taken along the projected path with Armijo
// backtracking.
InnerExit inner_minimize(const AlContext& ctx, NlpDerivatives& d,
                         Eigen::VectorXd& x, double tol, int max_iters) {
  const int n = ctx.nlp.num_vars();
  Eigen::VectorXd eq, ineq, grad;
  double cost;
  double L = al_eval(ctx, x, d, eq, ineq, cost, grad);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor;
  std::vector<HessianEntry> scratch;
  std::vector<int> map(n);
  std::vector<Eigen::Triplet<double>> trip;
  // damping carries over between iterations so indefinite stretches do not
  // pay for the failed factorizations of a cold escalation every step
  double nu_seed = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    if (projected_gradient_norm(x, grad, ctx.lo, ctx.hi) <= tol) {
      return InnerExit::kConverged;
    }
    const Eigen::SparseMatrix<double> h =
        al_hessian(ctx, d, x, eq, ineq, scratch);

    // epsilon-active bounds stay pinned for this step
    int nf = 0;
    for (int i = 0; i < n; ++i) {
      const double margin = 1e-8 * (1.0 + std::abs(x[i]));
      const bool pinned = (x[i] - ctx.lo[i] <= margin && grad[i] > 0.0) ||
                          (ctx.hi[i] - x[i] <= margin && grad[i] < 0.0);
      map[i] = pinned ? -1 : nf++;
    }
    if (nf == 0) return InnerExit::kConverged;
    Eigen::VectorXd gf(nf);
    for (int i = 0; i < n; ++i) {
      if (map[i] >= 0) gf[map[i]] = grad[i];
    }
    trip.clear();
    for (int k = 0; k < h.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator el(h, k); el; ++el) {
        const int r = map[el.row()], c = map[el.col()];
        if (r >= 0 && c >= 0) trip.emplace_back(r, c, el.value());
      }
    }

    Eigen::VectorXd dir = Eigen::VectorXd::Zero(n);
    bool solved = false;
    for (double nu = nu_seed; nu <= 1e12;) {
      Eigen::SparseMatrix<double> hff(nf, nf);
      hff.setFromTriplets(trip.begin(), trip.end());
      if (nu > 0.0) {
        Eigen::SparseMatrix<double> id(nf, nf);
        id.setIdentity();
        hff += nu * id;
      }
      factor.compute(hff);
      if (factor.info() == Eigen::Success &&
          factor.vectorD().minCoeff() > 0.0) {
        const Eigen::VectorXd df = factor.solve(-gf);
        if (df.allFinite()) {
          for (int i = 0; i < n; ++i) {
            if (map[i] >= 0) dir[i] = df[map[i]];
          }
          // decay toward the undamped Newton step once factorization holds
          nu_seed = nu <= 1e-6 ? 0.0 : 0.1 * nu;
          solved = true;
          break;
        }
      }
      nu = nu == 0.0 ? 1e-6 : 10.0 * nu;
    }
    if (!solved) return InnerExit::kStalled;

    // projected Armijo backtracking; the rounding slack keeps progress
    // certifiable when the true decrease falls below the precision of the
    // augmented-Lagrangian value itself
    const double slack =
        256.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(L));
    bool stepped = false;
    double alpha = 1.0;
    for (int ls = 0; ls < 50 && !stepped; ++ls, alpha *= 0.5) {
      const Eigen::VectorXd xn = clamp_to(x + alpha * dir, ctx.lo, ctx.hi);
      const double pred = grad.dot(xn - x);
      if (!(pred < 0.0)) continue;
      Eigen::VectorXd eqn, ineqn;
      const double Ln = al_value(ctx, xn, eqn, ineqn);
      if (std::isfinite(Ln) && Ln <= L + 1e-4 * pred + slack) {
        x = xn;
        L = al_eval(ctx, x, d, eq, ineq, cost, grad);
        stepped = true;
      }
    }
    if (!stepped) {
      if (ctx.verbosity >= 2) {
        std::fprintf(stderr, "    inner stall it=%d pg=%.3e\n", it,
                     projected_gradient_norm(x, grad, ctx.lo, ctx.hi));
      }
      return InnerExit::kStalled;
    }
  }
  return InnerExit::kIterLimit;
}

void check_config(const SolverConfig& cfg) {
  if (!(cfg.major_feasibility_tol > 0.0) || !(cfg.major_optimality_tol > 0.0) ||
      !(cfg.tight_tol > 0.0)) {
    throw std::invalid_argument("solve: tolerances must be positive");
  }
  if (cfg.max_major_iterations < 1 || cfg.max_minor_iterations < 1) {
    throw std::invalid_argument("solve: iteration limits must be positive");
  }
  if (!(cfg.initial_penalty > 0.0) || !(cfg.penalty_growth > 1.0) ||
      !(cfg.max_penalty >= cfg.initial_penalty)) {
    throw std::invalid_argument("solve: penalty settings malformed");
  }
}

}  // namespace

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal:
      return "optimal";
    case SolveStatus::kFeasibleSuboptimal:
      return "feasible_suboptimal";
    case SolveStatus::kInfeasible:
      return "infeasible";
    case SolveStatus::kIterationLimit:
      return "iteration_limit";
  }
  return "unknown";
}

SolveResult solve(const NlpProblem& nlp, const Eigen::VectorXd& start,
                  const SolverConfig& cfg, const WarmMultipliers* warm) {
  check_config(cfg);
  if (start.size() != nlp.num_vars()) {
    throw std::invalid_argument("solve: start length mismatch");
  }
  const auto t0 = std::chrono::steady_clock::now();

  const Eigen::VectorXd& lo = nlp.lower_bound();
  const Eigen::VectorXd& hi = nlp.upper_bound();
  Eigen::VectorXd x = clamp_to(start, lo, hi);
  Eigen::VectorXd lam = Eigen::VectorXd::Zero(nlp.num_eq());
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(nlp.num_ineq());
  double rho = cfg.initial_penalty;
  if (warm != nullptr) {
    if (warm->eq.size() != nlp.num_eq() ||
        warm->ineq.size() != nlp.num_ineq()) {
      throw std::invalid_argument("solve: warm multiplier length mismatch");
    }
    lam = warm->eq;
    mu = warm->ineq.cwiseMax(0.0);
    if (warm->penalty > 0.0) rho = std::min(warm->penalty, cfg.max_penalty);
  }
  NlpDerivatives d;
  nlp.init_derivatives(d);
  long evals = 0;

  SolveResult res;
  // Multipliers update on any tenth-of-improvement in violation; the penalty
  // grows only when a solved subproblem fails even that, or when accepted
  // majors contract weakly three times in a row. Rigid forcing targets are
  // deliberately absent: demanding fast contraction pumps the penalty past
  // 1e9, where the Newton systems lose too many digits to converge at all.
  // An inner loop that runs out of minor iterations while still descending
  // is rerun at the same penalty instead of counting against the gate.
  double omega = std::max(cfg.major_optimality_tol, 1.0 / rho);
  double viol_accept = std::numeric_limits<double>::infinity();
  double retry_al = std::numeric_limits<double>::infinity();
  int retries = 0;
  int weak_accepts = 0;
  int capped_stalls = 0;
  bool done = false;

  for (int major = 0; major < cfg.max_major_iterations && !done; ++major) {
    AlContext ctx{nlp, lo, hi, lam, mu, rho, &evals, cfg.verbosity};
    const InnerExit exit =
        inner_minimize(ctx, d, x, omega, cfg.max_minor_iterations);

    Eigen::VectorXd eq, ineq, grad;
    double cost;
    const double al = al_eval(ctx, x, d, eq, ineq, cost, grad);
    const double viol = max_violation(eq, ineq);
    const double stat = projected_gradient_norm(x, grad, lo, hi);

    OuterRecord rec;
    rec.iteration = major;
    rec.cost = cost;
    rec.violation = viol;
    rec.stationarity = stat;
    rec.penalty = rho;

    res.cost = cost;
    res.feasibility = viol;
    res.stationarity = stat;
    res.eq_multipliers = lam + rho * eq;
    res.ineq_multipliers = (mu - rho * ineq).cwiseMax(0.0);

    if (viol <= cfg.major_feasibility_tol &&
        stat <= cfg.major_optimality_tol) {
      res.status = SolveStatus::kOptimal;
      done = true;
    } else {
      const double al_slack = 1e-10 * (1.0 + std::abs(al));
      const bool descending = al < retry_al - al_slack;
      if (exit == InnerExit::kIterLimit && descending && retries < 6) {
        // unsolved subproblem, still making headway: same penalty, same
        // multipliers, fresh minor budget
        ++retries;
        retry_al = al;
      } else {
        retries = 0;
        retry_al = std::numeric_limits<double>::infinity();
        // the 1.0 cap keeps the very first update from freezing in
        // multipliers scaled by a grossly violated start
        const double gate = std::max(cfg.major_feasibility_tol,
                                     std::min(1.0, 0.9 * viol_accept));
        if (viol <= gate) {
          lam = res.eq_multipliers;
          mu = res.ineq_multipliers;
          const bool strong =
              viol <= std::max(cfg.major_feasibility_tol, 0.25 * viol_accept);
          weak_accepts = strong ? 0 : weak_accepts + 1;
          viol_accept = viol;
          omega = std::max(cfg.major_optimality_tol, 0.1 * omega);
          rec.accepted = true;
          capped_stalls = 0;
          if (weak_accepts >= 3 && rho < 1e8) {
            rho *= cfg.penalty_growth;
            weak_accepts = 0;
          }
        } else if (rho >= cfg.max_penalty) {
          if (++capped_stalls >= 3) {
            res.status = SolveStatus::kInfeasible;
            done = true;
          }
        } else {
          rho *= cfg.penalty_growth;
        }
        // conditioning relief: once the multipliers hold feasibility with
        // margin, a penalty parked above 1e7 only starves the inner loop,
        // whose steps shrink with the penalty curvature
        if (!done && viol <= 0.1 * cfg.major_feasibility_tol &&
            stat > cfg.major_optimality_tol && rho > 1e7) {
          rho /= cfg.penalty_growth;
        }
      }
      if (viol <= cfg.major_feasibility_tol) {
        omega = cfg.major_optimality_tol;
      }
    }
    res.history.push_back(rec);
    if (cfg.verbosity >= 1) {
      std::fprintf(stderr, "%d\t%.9e\t%.3e\t%.3e\t%.3e\n", major, cost, viol,
                   rho, stat);
    }
  }

  if (!done) {
    res.status = res.feasibility <= cfg.major_feasibility_tol
                     ? SolveStatus::kFeasibleSuboptimal
                     : SolveStatus::kIterationLimit;
  }
  res.x = x;
  res.major_iterations = static_cast<int>(res.history.size());
  res.function_evals = evals;
  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return res;
}

SolveResult homotopy_solve(
    const std::function<std::unique_ptr<NlpProblem>(double)>& factory,
    const std::vector<double>& schedule, const Eigen::VectorXd& start,
    const SolverConfig& cfg) {
  if (schedule.empty()) {
    throw std::invalid_argument("homotopy_solve: schedule must not be empty");
  }
  for (std::size_t i = 1; i < schedule.size(); ++i) {
    if (!(schedule[i] < schedule[i - 1])) {
      throw std::invalid_argument(
          "homotopy_solve: schedule must be strictly decreasing");
    }
  }
  Eigen::VectorXd x = start;
  std::vector<OuterRecord> history;
  long evals = 0;
  double wall = 0.0;
  SolveResult r;
  WarmMultipliers carry;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    std::unique_ptr<NlpProblem> nlp = factory(schedule[i]);
    if (!nlp) {
      throw std::invalid_argument("homotopy_solve: factory returned no problem");
    }
    // multipliers only carry over when the stages share constraint shapes
    const bool warm_ok = i > 0 && carry.eq.size() == nlp->num_eq() &&
                         carry.ineq.size() == nlp->num_ineq();
    r = solve(*nlp, x, cfg, warm_ok ? &carry : nullptr);
    for (OuterRecord rec : r.history) {
      rec.stage = static_cast<int>(i);
      history.push_back(rec);
    }
    evals += r.function_evals;
    wall += r.wall_seconds;
    if (r.status != SolveStatus::kOptimal) {
      r.failed_stage = static_cast<int>(i);
      r.history = std::move(history);
      r.major_iterations = static_cast<int>(r.history.size());
      r.function_evals = evals;
      r.wall_seconds = wall;
      return r;
    }
    x = r.x;
    carry.eq = r.eq_multipliers;
    carry.ineq = r.ineq_multipliers;
    // back the penalty off between stages: with multipliers carried a far
    // smaller penalty holds the iterate, and an inflated one turns the
    // feasibility term into gradient noise at machine precision
    const double final_rho = r.history.empty() ? 0.0 : r.history.back().penalty;
    carry.penalty = std::max(cfg.initial_penalty, 0.01 * final_rho);
  }
  r.failed_stage = -1;
  r.history = std::move(history);
  r.major_iterations = static_cast<int>(r.history.size());
  r.function_evals = evals;
  r.wall_seconds = wall;
  return r;
}

Eigen::VectorXd default_start(const ProblemSpec& spec) {
  validate(spec);
  const VariableLayout L = VariableLayout::from_spec(spec);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(L.total);
  const int nx = L.nq + L.nv;
  const double mass = spec.model.type == SystemType::kBlock
                          ? spec.model.block_mass
                          : spec.model.base_mass + 2.0 * spec.model.link_mass;
  const double support = mass * spec.model.gravity / L.nc;
  for (int k = 0; k < L.K; ++k) {
    const double t = static_cast<double>(k) / (L.K - 1);
    for (int i = 0; i < nx; ++i) {
      x[L.q_offset(k) + i] = (1.0 - t) * spec.x0[i] + t * spec.xF[i];
    }
    for (int c = 0; c < L.nc; ++c) {
      x[L.lambda_n_offset(k, c)] = support;
    }
  }
  if (L.variable_h) {
    for (int k = 0; k < L.K - 1; ++k) {
      x[L.h_offset(k)] = spec.nominal_h();
    }
  }
  return x;
}

Eigen::VectorXd warm_start_from(const SolutionTrajectory& solution,
                                const ProblemSpec& target_spec) {
  validate(target_spec);
  const VariableLayout L = VariableLayout::from_spec(target_spec);
  if (solution.knot_count != L.K) {
    throw std::invalid_argument("warm_start_from: knot count mismatch");
  }
  if (solution.q.cols() != L.nq || solution.v.cols() != L.nv ||
      solution.u.cols() != L.nu || solution.lambda_n.cols() != L.nc) {
    throw std::invalid_argument("warm_start_from: model dimension mismatch");
  }
  SolutionTrajectory t = solution;
  if (t.h.size() != L.K - 1) {
    t.h = Eigen::VectorXd::Constant(L.K - 1, target_spec.nominal_h());
  }
  return pack_solution(target_spec, t);
}

}  // namespace rcito
