#include "rcito/transcription.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "rcito/fad.hpp"
#include "rcito/fad2.hpp"
#include "rcito/model_kernels.hpp"
#include "rcito/sparse.hpp"

namespace rcito {
namespace {

using GroupConfig = TranscribedNlp::GroupConfig;

// Runs body(0..n-1); independent iterations, so the parallel path writes the
// same slots the serial path does and the results are bit-identical.
template <class F>
void run_indexed(int threads, int n, const F& body) {
  if (threads > 1) {
#pragma omp parallel for schedule(static) num_threads(threads)
    for (int i = 0; i < n; ++i) body(i);
  } else {
    for (int i = 0; i < n; ++i) body(i);
  }
}

// Writes one residual row; the dual path copies tangents into the row's CSR
// slots, which were laid out in the same sorted-column order as the seeds.
template <class Scalar>
void store_row(Eigen::VectorXd& out, CsrMatrix* jac, int row, const Scalar& val,
               int width) {
  if constexpr (std::is_same_v<Scalar, fad::Dual>) {
    out[row] = val.v;
    double* dst = jac->values.data() + jac->row_ptr[row];
    for (int t = 0; t < width; ++t) dst[t] = val.d[t];
  } else {
    (void)jac;
    (void)width;
    out[row] = val;
  }
}

// Momentum balance over [k, k+1] with contact impulses applied through the
// Jacobians at q_k, plus the implicit position update q_{k+1} = q_k + h v_{k+1}.
template <class Scalar>
void interval_residuals(const SystemModel& m, const Scalar* qk,
                        const Scalar* vk, const Scalar* qk1, const Scalar* vk1,
                        const Scalar* u1, const Scalar* lam, const Scalar& h,
                        Scalar* dyn, Scalar* pos) {
  const int nq = m.nq, nv = m.nv, nc = m.num_contacts();
  Scalar mass[kernels::kMaxV * kernels::kMaxV];
  kernels::mass_matrix(m, qk, mass);
  Scalar bias[kernels::kMaxV];
  kernels::bias_forces(m, qk, vk, bias);
  for (int i = 0; i < nv; ++i) {
    Scalar acc = h * bias[i];
    for (int j = 0; j < nv; ++j) {
      acc = acc + mass[i * nv + j] * (vk1[j] - vk[j]);
    }
    dyn[i] = acc;
  }
  if (m.type == SystemType::kBlock) {
    dyn[0] = dyn[0] - h * u1[0];
  } else {
    dyn[2] = dyn[2] - h * u1[0];
    dyn[3] = dyn[3] - h * u1[1];
    dyn[4] = dyn[4] - h * u1[2];
  }
  Scalar phi, jn[kernels::kMaxV], jt[2 * kernels::kMaxV];
  for (int c = 0; c < nc; ++c) {
    kernels::contact_kinematics(m, qk, c, &phi, jn, jt);
    const Scalar* l = lam + 3 * c;
    for (int i = 0; i < nv; ++i) {
      dyn[i] = dyn[i] - h * (jn[i] * l[0] + jt[i] * l[1] + jt[nv + i] * l[2]);
    }
  }
  for (int i = 0; i < nq; ++i) {
    pos[i] = qk1[i] - qk[i] - h * vk1[i];
  }
}

template <class Scalar>
struct ContactMeans {
  Scalar m_d;      // (scaled) signed distance residual
  Scalar s0, s1;   // gamma + tangential velocity along +/- x
  Scalar m_c;      // friction-cone margin mu*lambda_N - sum(lambda_T)
};

template <class Scalar>
ContactMeans<Scalar> contact_means(const SystemModel& m, const GroupConfig& g,
                                   int c, const Scalar* q, const Scalar* v,
                                   const Scalar* b) {
  const int nv = m.nv;
  Scalar phi, jn[kernels::kMaxV], jt[2 * kernels::kMaxV];
  kernels::contact_kinematics(m, q, c, &phi, jn, jt);
  Scalar t0(0.0), t1(0.0);
  for (int i = 0; i < nv; ++i) {
    t0 = t0 + jt[i] * v[i];
    t1 = t1 + jt[nv + i] * v[i];
  }
  ContactMeans<Scalar> r;
  r.m_d = g.distance_uncertain ? Scalar(g.scale) * (phi - g.dist_mean) : phi;
  r.s0 = b[3] + t0;
  r.s1 = b[3] + t1;
  r.m_c = g.friction_mean * b[0] - b[1] - b[2];
  return r;
}

// Rows for one contact, in emission order: nonnegativity margins
// [distance, sliding+, sliding-, cone], then whichever product rows the mode
// keeps.  Chance offsets vanish at theta = beta = 0.5, recovering the strict
// rows exactly.
template <class Scalar>
int contact_rows(const SystemModel& m, const GroupConfig& g, int c,
                 const Scalar* q, const Scalar* v, const Scalar* cvars,
                 Scalar* out) {
  const Scalar* b = cvars + 4 * c;
  const ContactMeans<Scalar> mm = contact_means(m, g, c, q, v, b);
  const Scalar& ln = b[0];
  const Scalar& lt0 = b[1];
  const Scalar& lt1 = b[2];
  const Scalar& ga = b[3];
  int r = 0;
  out[r++] = mm.m_d - g.d_lower;
  out[r++] = mm.s0;
  out[r++] = mm.s1;
  out[r++] = mm.m_c - g.c_lower_coeff * ln;
  if (g.has_d2) {
    const Scalar ub =
        g.chance_distance ? Scalar(g.d_upper_coeff) * ln : Scalar(0.0);
    out[r++] = ub + g.epsilon - ln * mm.m_d;
  }
  if (g.has_s2) {
    out[r++] = g.epsilon - lt0 * mm.s0;
    out[r++] = g.epsilon - lt1 * mm.s1;
  }
  if (g.has_c2) {
    const Scalar ub =
        g.chance_friction ? Scalar(g.c_upper_coeff) * ln * ga : Scalar(0.0);
    out[r++] = ub + g.epsilon - ga * mm.m_c;
  }
  return r;
}

// Loads knot j's configuration, velocity, and contact variables, seeding the
// duals in the same order the knot-row CSR columns were laid out.
template <bool Seed, class Scalar>
void load_knot_group(const VariableLayout& L, const Eigen::VectorXd& x, int j,
                     Scalar* q, Scalar* v, Scalar* cvars) {
  for (int i = 0; i < L.nq; ++i) {
    q[i] = Scalar(x[L.q_offset(j) + i]);
    if constexpr (Seed) q[i].seed(i);
  }
  for (int i = 0; i < L.nv; ++i) {
    v[i] = Scalar(x[L.v_offset(j) + i]);
    if constexpr (Seed) v[i].seed(L.nq + i);
  }
  for (int c = 0; c < L.nc; ++c) {
    for (int i = 0; i < 4; ++i) {
      cvars[4 * c + i] = Scalar(x[L.contact_offset(j, c) + i]);
      if constexpr (Seed) cvars[4 * c + i].seed(L.nq + L.nv + 4 * c + i);
    }
  }
}

template <bool WithDerivs>
void eval_eq_impl(const ProblemSpec& spec, const VariableLayout& L, int threads,
                  const Eigen::VectorXd& x, Eigen::VectorXd& eq,
                  CsrMatrix* jac) {
  using Scalar = std::conditional_t<WithDerivs, fad::Dual, double>;
  const SystemModel& m = spec.model;
  const int nq = L.nq, nv = L.nv, nu = L.nu, nc = L.nc, K = L.K;
  const int nx = nq + nv;
  const double hbar = spec.nominal_h();
  const int width = 2 * nx + nu + 3 * nc + (L.variable_h ? 1 : 0);
  const int fin = nx + (K - 1) * (nv + nq);

  eq.head(nx) = x.segment(L.q_offset(0), nx) - spec.x0;
  eq.segment(fin, nx) = x.segment(L.q_offset(K - 1), nx) - spec.xF;
  if (L.variable_h) {
    double s = 0.0;
    for (int k = 0; k < K - 1; ++k) s += x[L.h_offset(k)];
    eq[fin + nx] = s - spec.horizon;
  }
  if constexpr (WithDerivs) {
    for (int i = 0; i < nx; ++i) jac->values[jac->row_ptr[i]] = 1.0;
    for (int i = 0; i < nx; ++i) jac->values[jac->row_ptr[fin + i]] = 1.0;
    if (L.variable_h) {
      double* dst = jac->values.data() + jac->row_ptr[fin + nx];
      for (int k = 0; k < K - 1; ++k) dst[k] = 1.0;
    }
  }

  auto body = [&](int k) {
    std::optional<fad::ScopedWidth> scope;
    if constexpr (WithDerivs) scope.emplace(width);
    Scalar qk[kernels::kMaxV], vk[kernels::kMaxV], qk1[kernels::kMaxV],
        vk1[kernels::kMaxV], u1[kernels::kMaxV], lam[6], h;
    auto load = [&](Scalar* dst, int off, int n, int seed) {
      for (int i = 0; i < n; ++i) {
        dst[i] = Scalar(x[off + i]);
        if constexpr (WithDerivs) dst[i].seed(seed + i);
      }
    };
    load(qk, L.q_offset(k), nq, 0);
    load(vk, L.v_offset(k), nv, nq);
    load(qk1, L.q_offset(k + 1), nq, nx);
    load(vk1, L.v_offset(k + 1), nv, nx + nq);
    load(u1, L.u_offset(k + 1), nu, 2 * nx);
    for (int c = 0; c < nc; ++c) {
      load(lam + 3 * c, L.lambda_n_offset(k + 1, c), 3, 2 * nx + nu + 3 * c);
    }
    if (L.variable_h) {
      h = Scalar(x[L.h_offset(k)]);
      if constexpr (WithDerivs) h.seed(width - 1);
    } else {
      h = Scalar(hbar);
    }
    Scalar dyn[kernels::kMaxV], pos[kernels::kMaxV];
    interval_residuals(m, qk, vk, qk1, vk1, u1, lam, h, dyn, pos);
    const int base = nx + k * (nv + nq);
    for (int i = 0; i < nv; ++i) store_row(eq, jac, base + i, dyn[i], width);
    for (int i = 0; i < nq; ++i) {
      store_row(eq, jac, base + nv + i, pos[i], width);
    }
  };
  run_indexed(threads, K - 1, body);
}

template <bool WithDerivs>
void eval_ineq_impl(const ProblemSpec& spec, const VariableLayout& L,
                    const GroupConfig& g, int threads, int per_knot,
                    const Eigen::VectorXd& x, Eigen::VectorXd& ineq,
                    CsrMatrix* jac) {
  using Scalar = std::conditional_t<WithDerivs, fad::Dual, double>;
  const int width = L.nq + L.nv + 4 * L.nc;
  auto body = [&](int j) {
    std::optional<fad::ScopedWidth> scope;
    if constexpr (WithDerivs) scope.emplace(width);
    Scalar q[kernels::kMaxV], v[kernels::kMaxV], cvars[8], rows[8];
    load_knot_group<WithDerivs>(L, x, j, q, v, cvars);
    int row = j * per_knot;
    for (int c = 0; c < L.nc; ++c) {
      const int n = contact_rows(spec.model, g, c, q, v, cvars, rows);
      for (int r = 0; r < n; ++r) store_row(ineq, jac, row++, rows[r], width);
    }
  };
  run_indexed(threads, L.K, body);
}

template <bool WithDerivs>
void eval_cost_impl(const ProblemSpec& spec, const VariableLayout& L,
                    const GroupConfig& g, int threads, const Eigen::VectorXd& x,
                    double& cost, Eigen::VectorXd* grad) {
  using Scalar = std::conditional_t<WithDerivs, fad::Dual, double>;
  const int nq = L.nq, nv = L.nv, nu = L.nu, nc = L.nc, K = L.K;
  const int nx = nq + nv;
  const double hbar = spec.nominal_h();
  const bool penalty = g.pen_d || g.pen_s || g.pen_c;
  std::vector<double> partial(K, 0.0);
  auto body = [&](int j) {
    double acc = 0.0;
    const int xoff = L.q_offset(j);
    for (int i = 0; i < nx; ++i) {
      const double dxi = x[xoff + i] - spec.xF[i];
      const double w = hbar * spec.q_weights[i];
      acc += w * dxi * dxi;
      if constexpr (WithDerivs) (*grad)[xoff + i] += 2.0 * w * dxi;
    }
    const int uoff = L.u_offset(j);
    for (int i = 0; i < nu; ++i) {
      const double ui = x[uoff + i];
      const double w = hbar * spec.r_weights[i];
      acc += w * ui * ui;
      if constexpr (WithDerivs) (*grad)[uoff + i] += 2.0 * w * ui;
    }
    if (g.erm_on && g.friction_uncertain) {
      std::optional<fad::ScopedWidth> scope;
      if constexpr (WithDerivs) scope.emplace(4);
      for (int c = 0; c < nc; ++c) {
        const int coff = L.contact_offset(j, c);
        Scalar b[4];
        for (int i = 0; i < 4; ++i) {
          b[i] = Scalar(x[coff + i]);
          if constexpr (WithDerivs) b[i].seed(i);
        }
        const Scalar m_c = g.friction_mean * b[0] - b[1] - b[2];
        const Scalar term =
            g.erm_alpha *
            erm_min_residual(b[3], m_c, Scalar(g.sigma_friction) * b[0]);
        acc += fad::value(term);
        if constexpr (WithDerivs) {
          for (int t = 0; t < 4; ++t) (*grad)[coff + t] += term.d[t];
        }
      }
    }
    if (g.erm_on && g.distance_uncertain) {
      std::optional<fad::ScopedWidth> scope;
      if constexpr (WithDerivs) scope.emplace(nq + 1);
      Scalar q[kernels::kMaxV];
      for (int i = 0; i < nq; ++i) {
        q[i] = Scalar(x[L.q_offset(j) + i]);
        if constexpr (WithDerivs) q[i].seed(i);
      }
      for (int c = 0; c < nc; ++c) {
        Scalar ln = Scalar(x[L.lambda_n_offset(j, c)]);
        if constexpr (WithDerivs) ln.seed(nq);
        Scalar p[2];
        kernels::contact_position(spec.model, q, c, p);
        const Scalar m_d = Scalar(g.scale) * (p[1] - g.dist_mean);
        const Scalar term =
            g.erm_alpha * erm_min_residual(ln, m_d, Scalar(g.sigma_distance));
        acc += fad::value(term);
        if constexpr (WithDerivs) {
          for (int t = 0; t < nq; ++t) (*grad)[L.q_offset(j) + t] += term.d[t];
          (*grad)[L.lambda_n_offset(j, c)] += term.d[nq];
        }
      }
    }
    if (penalty) {
      const int width = nq + nv + 4 * nc;
      std::optional<fad::ScopedWidth> scope;
      if constexpr (WithDerivs) scope.emplace(width);
      Scalar q[kernels::kMaxV], v[kernels::kMaxV], cvars[8];
      load_knot_group<WithDerivs>(L, x, j, q, v, cvars);
      Scalar sum(0.0);
      for (int c = 0; c < nc; ++c) {
        const Scalar* b = cvars + 4 * c;
        const ContactMeans<Scalar> mm =
            contact_means(spec.model, g, c, q, v, b);
        if (g.pen_d) sum = sum + b[0] * mm.m_d;
        if (g.pen_s) sum = sum + b[1] * mm.s0 + b[2] * mm.s1;
        if (g.pen_c) sum = sum + b[3] * mm.m_c;
      }
      const Scalar term = g.penalty_rho * sum;
      acc += fad::value(term);
      if constexpr (WithDerivs) {
        for (int t = 0; t < nq; ++t) (*grad)[L.q_offset(j) + t] += term.d[t];
        for (int t = 0; t < nv; ++t) {
          (*grad)[L.v_offset(j) + t] += term.d[nq + t];
        }
        for (int c = 0; c < nc; ++c) {
          for (int r = 0; r < 4; ++r) {
            (*grad)[L.contact_offset(j, c) + r] +=
                term.d[nq + nv + 4 * c + r];
          }
        }
      }
    }
    partial[j] = acc;
  };
  run_indexed(threads, K, body);
  // Serial summation in knot order keeps the total independent of threading.
  double total = 0.0;
  for (int j = 0; j < K; ++j) total += partial[j];
  cost = total;
}

// Scatters a group's packed upper triangle into global triplets, both
// triangles so duplicates across groups simply accumulate.
void scatter_group(const fad2::Dual2& s, const int* col_of, int width,
                   std::vector<HessianEntry>& out) {
  for (int j = 0; j < width; ++j) {
    for (int i = 0; i <= j; ++i) {
      const double hij = s.h[fad2::packed(i, j)];
      if (hij == 0.0) continue;
      out.push_back({col_of[i], col_of[j], hij});
      if (i != j) out.push_back({col_of[j], col_of[i], hij});
    }
  }
}

// Second derivatives of cost_scale * f + w_eq . eq + w_ineq . ineq, built
// group by group with second-order duals.  Serial: one solve owns one
// problem, and the Hessian sits inside that solve's inner loop.
void hessian_impl(const ProblemSpec& spec, const VariableLayout& L,
                  const GroupConfig& g, int per_knot, const Eigen::VectorXd& x,
                  double cost_scale, const Eigen::VectorXd& w_eq,
                  const Eigen::VectorXd& w_ineq,
                  std::vector<HessianEntry>& out) {
  using fad2::Dual2;
  const SystemModel& m = spec.model;
  const int nq = L.nq, nv = L.nv, nu = L.nu, nc = L.nc, K = L.K;
  const int nx = nq + nv;
  const double hbar = spec.nominal_h();

  // Quadratic tracking cost: constant diagonal.
  if (cost_scale != 0.0) {
    for (int j = 0; j < K; ++j) {
      for (int i = 0; i < nx; ++i) {
        const double d = 2.0 * cost_scale * hbar * spec.q_weights[i];
        if (d != 0.0) out.push_back({L.q_offset(j) + i, L.q_offset(j) + i, d});
      }
      for (int i = 0; i < nu; ++i) {
        const double d = 2.0 * cost_scale * hbar * spec.r_weights[i];
        if (d != 0.0) out.push_back({L.u_offset(j) + i, L.u_offset(j) + i, d});
      }
    }
  }

  // Dynamics and position rows, one interval group at a time; the seed order
  // matches eval_eq_impl so col_of mirrors that layout.
  {
    const int width = 2 * nx + nu + 3 * nc + (L.variable_h ? 1 : 0);
    fad::ScopedWidth scope(width);
    std::vector<int> col_of(width);
    for (int k = 0; k < K - 1; ++k) {
      int t = 0;
      for (int i = 0; i < nx; ++i) col_of[t++] = L.q_offset(k) + i;
      for (int i = 0; i < nx + nu; ++i) col_of[t++] = L.q_offset(k + 1) + i;
      for (int c = 0; c < nc; ++c) {
        for (int r = 0; r < 3; ++r) {
          col_of[t++] = L.lambda_n_offset(k + 1, c) + r;
        }
      }
      if (L.variable_h) col_of[t++] = L.h_offset(k);
      Dual2 qk[kernels::kMaxV], vk[kernels::kMaxV], qk1[kernels::kMaxV],
          vk1[kernels::kMaxV], u1[kernels::kMaxV], lam[6], h;
      auto load = [&](Dual2* dst, int off, int n, int seed) {
        for (int i = 0; i < n; ++i) {
          dst[i] = Dual2(x[off + i]);
          dst[i].seed(seed + i);
        }
      };
      load(qk, L.q_offset(k), nq, 0);
      load(vk, L.v_offset(k), nv, nq);
      load(qk1, L.q_offset(k + 1), nq, nx);
      load(vk1, L.v_offset(k + 1), nv, nx + nq);
      load(u1, L.u_offset(k + 1), nu, 2 * nx);
      for (int c = 0; c < nc; ++c) {
        load(lam + 3 * c, L.lambda_n_offset(k + 1, c), 3, 2 * nx + nu + 3 * c);
      }
      if (L.variable_h) {
        h = Dual2(x[L.h_offset(k)]);
        h.seed(width - 1);
      } else {
        h = Dual2(spec.nominal_h());
      }
      Dual2 dyn[kernels::kMaxV], pos[kernels::kMaxV];
      interval_residuals(m, qk, vk, qk1, vk1, u1, lam, h, dyn, pos);
      const int base = nx + k * (nv + nq);
      Dual2 s(0.0);
      for (int i = 0; i < nv; ++i) {
        if (w_eq[base + i] != 0.0) s += w_eq[base + i] * dyn[i];
      }
      for (int i = 0; i < nq; ++i) {
        if (w_eq[base + nv + i] != 0.0) s += w_eq[base + nv + i] * pos[i];
      }
      scatter_group(s, col_of.data(), width, out);
    }
  }
  // Boundary and timestep-sum rows are linear: nothing to add.

  // Contact inequality rows, one knot group at a time.
  {
    const int width = nq + nv + 4 * nc;
    fad::ScopedWidth scope(width);
    std::vector<int> col_of(width);
    for (int j = 0; j < K; ++j) {
      int row = j * per_knot;
      bool any = false;
      for (int r = 0; r < per_knot; ++r) any = any || w_ineq[row + r] != 0.0;
      if (!any) continue;
      int t = 0;
      for (int i = 0; i < nq; ++i) col_of[t++] = L.q_offset(j) + i;
      for (int i = 0; i < nv; ++i) col_of[t++] = L.v_offset(j) + i;
      for (int c = 0; c < nc; ++c) {
        for (int i = 0; i < 4; ++i) col_of[t++] = L.contact_offset(j, c) + i;
      }
      Dual2 q[kernels::kMaxV], v[kernels::kMaxV], cvars[8], rows[8];
      load_knot_group<true>(L, x, j, q, v, cvars);
      Dual2 s(0.0);
      for (int c = 0; c < nc; ++c) {
        const int n = contact_rows(m, g, c, q, v, cvars, rows);
        for (int r = 0; r < n; ++r, ++row) {
          if (w_ineq[row] != 0.0) s += w_ineq[row] * rows[r];
        }
      }
      scatter_group(s, col_of.data(), width, out);
    }
  }

  if (cost_scale != 0.0 && g.erm_on && g.friction_uncertain) {
    fad::ScopedWidth scope(4);
    int col_of[4];
    for (int j = 0; j < K; ++j) {
      for (int c = 0; c < nc; ++c) {
        const int coff = L.contact_offset(j, c);
        Dual2 b[4];
        for (int i = 0; i < 4; ++i) {
          b[i] = Dual2(x[coff + i]);
          b[i].seed(i);
          col_of[i] = coff + i;
        }
        const Dual2 m_c = g.friction_mean * b[0] - b[1] - b[2];
        const Dual2 term =
            (cost_scale * g.erm_alpha) *
            erm_min_residual(b[3], m_c, Dual2(g.sigma_friction) * b[0]);
        scatter_group(term, col_of, 4, out);
      }
    }
  }

  if (cost_scale != 0.0 && g.erm_on && g.distance_uncertain) {
    const int width = nq + 1;
    fad::ScopedWidth scope(width);
    std::vector<int> col_of(width);
    for (int j = 0; j < K; ++j) {
      Dual2 q[kernels::kMaxV];
      for (int i = 0; i < nq; ++i) {
        q[i] = Dual2(x[L.q_offset(j) + i]);
        q[i].seed(i);
        col_of[i] = L.q_offset(j) + i;
      }
      for (int c = 0; c < nc; ++c) {
        Dual2 ln(x[L.lambda_n_offset(j, c)]);
        ln.seed(nq);
        col_of[nq] = L.lambda_n_offset(j, c);
        Dual2 p[2];
        kernels::contact_position(m, q, c, p);
        const Dual2 m_d = Dual2(g.scale) * (p[1] - g.dist_mean);
        const Dual2 term = (cost_scale * g.erm_alpha) *
                           erm_min_residual(ln, m_d, Dual2(g.sigma_distance));
        scatter_group(term, col_of.data(), width, out);
      }
    }
  }

  if (cost_scale != 0.0 && (g.pen_d || g.pen_s || g.pen_c)) {
    const int width = nq + nv + 4 * nc;
    fad::ScopedWidth scope(width);
    std::vector<int> col_of(width);
    for (int j = 0; j < K; ++j) {
      int t = 0;
      for (int i = 0; i < nq; ++i) col_of[t++] = L.q_offset(j) + i;
      for (int i = 0; i < nv; ++i) col_of[t++] = L.v_offset(j) + i;
      for (int c = 0; c < nc; ++c) {
        for (int i = 0; i < 4; ++i) col_of[t++] = L.contact_offset(j, c) + i;
      }
      Dual2 q[kernels::kMaxV], v[kernels::kMaxV], cvars[8];
      load_knot_group<true>(L, x, j, q, v, cvars);
      Dual2 sum(0.0);
      for (int c = 0; c < nc; ++c) {
        const Dual2* b = cvars + 4 * c;
        const ContactMeans<Dual2> mm = contact_means(m, g, c, q, v, b);
        if (g.pen_d) sum += b[0] * mm.m_d;
        if (g.pen_s) sum += b[1] * mm.s0 + b[2] * mm.s1;
        if (g.pen_c) sum += b[3] * mm.m_c;
      }
      const Dual2 term = (cost_scale * g.penalty_rho) * sum;
      scatter_group(term, col_of.data(), width, out);
    }
  }
}

}  // namespace

void validate(const ProblemSpec& spec) {
  const SystemModel& m = spec.model;
  if (m.nq != m.nv) {
    throw std::invalid_argument("validate: model must have nq == nv");
  }
  if (m.nv < 1 || m.nv > kernels::kMaxV) {
    throw std::invalid_argument("validate: unsupported velocity dimension");
  }
  if (m.nu < 0 || m.nu > kernels::kMaxV) {
    throw std::invalid_argument("validate: unsupported control dimension");
  }
  const int nc = m.num_contacts();
  if (nc < 1 || nc > 2) {
    throw std::invalid_argument("validate: unsupported contact count");
  }
  const int nx = m.nq + m.nv;
  if (spec.knot_count < 2) {
    throw std::invalid_argument("validate: knot_count must be at least 2");
  }
  if (!(spec.horizon > 0.0)) {
    throw std::invalid_argument("validate: horizon must be positive");
  }
  if (spec.x0.size() != nx || spec.xF.size() != nx) {
    throw std::invalid_argument("validate: boundary states must have nq + nv entries");
  }
  if (spec.q_weights.size() != nx) {
    throw std::invalid_argument("validate: q_weights must have nq + nv entries");
  }
  if (spec.r_weights.size() != m.nu) {
    throw std::invalid_argument("validate: r_weights must have nu entries");
  }
  if ((spec.q_weights.array() < 0.0).any() ||
      (spec.r_weights.array() < 0.0).any()) {
    throw std::invalid_argument("validate: cost weights must be nonnegative");
  }
  if (spec.epsilon < 0.0) {
    throw std::invalid_argument("validate: epsilon must be nonnegative");
  }
  for (const double e : spec.epsilon_schedule) {
    if (!(e > 0.0)) {
      throw std::invalid_argument(
          "validate: epsilon_schedule entries must be positive");
    }
  }
  if (!(spec.penalty_rho > 0.0)) {
    throw std::invalid_argument("validate: penalty_rho must be positive");
  }
  if (spec.contact_mode == ContactMode::kChance) {
    if (!spec.uncertainty) {
      throw std::invalid_argument(
          "validate: chance constraints require an uncertainty model");
    }
    const double th = spec.chance.theta, be = spec.chance.beta;
    if (!(th > 0.0 && th < 1.0 && be > 0.0 && be < 1.0)) {
      throw std::invalid_argument(
          "validate: chance levels must lie strictly inside (0, 1)");
    }
  }
  if (spec.erm) {
    if (!spec.uncertainty) {
      throw std::invalid_argument(
          "validate: expected-residual cost requires an uncertainty model");
    }
    if (spec.erm->alpha < 0.0) {
      throw std::invalid_argument("validate: erm alpha must be nonnegative");
    }
  }
  if (spec.uncertainty) {
    if (spec.uncertainty->sigma < 0.0) {
      throw std::invalid_argument(
          "validate: uncertainty sigma must be nonnegative");
    }
    if (!(spec.uncertainty->scale > 0.0)) {
      throw std::invalid_argument(
          "validate: uncertainty scale must be positive");
    }
  }
}

VariableLayout VariableLayout::from_spec(const ProblemSpec& spec) {
  VariableLayout L;
  L.nq = spec.model.nq;
  L.nv = spec.model.nv;
  L.nu = spec.model.nu;
  L.nc = spec.model.num_contacts();
  L.K = spec.knot_count;
  L.variable_h = spec.timestep_mode == TimestepMode::kBoundedVariable;
  L.knot_stride = L.nq + L.nv + L.nu + 4 * L.nc;
  L.total = L.K * L.knot_stride + (L.variable_h ? L.K - 1 : 0);
  return L;
}

TranscribedNlp::TranscribedNlp(const ProblemSpec& spec, int threads)
    : spec_(spec), threads_(std::max(1, threads)) {
  validate(spec_);
  layout_ = VariableLayout::from_spec(spec_);

  GroupConfig& g = group_;
  g.epsilon = spec_.epsilon;
  g.friction_mean = spec_.model.friction_mean;
  g.penalty_rho = spec_.penalty_rho;
  if (spec_.uncertainty) {
    const UncertaintySpec& u = *spec_.uncertainty;
    if (u.target == UncertaintySpec::Target::kFriction) {
      g.friction_uncertain = true;
      g.friction_mean = u.mean;
      g.sigma_friction = u.sigma;
    } else {
      g.distance_uncertain = true;
      g.scale = u.scale;
      g.dist_mean = u.mean;
      g.sigma_distance = u.scale * u.sigma;
    }
  }
  if (spec_.contact_mode == ContactMode::kChance) {
    g.chance_distance = g.distance_uncertain;
    g.chance_friction = g.friction_uncertain;
    const double th = spec_.chance.theta;
    const double be = spec_.chance.beta;
    g.d_lower = chance_lower_bound(g.sigma_distance, be);
    g.d_upper_coeff = chance_upper_bound(g.sigma_distance, th, 1.0);
    g.c_lower_coeff = chance_lower_bound(g.sigma_friction, be);
    g.c_upper_coeff = chance_upper_bound(g.sigma_friction, th, 1.0);
  }
  const bool penalty = spec_.contact_mode == ContactMode::kExactPenalty;
  g.has_d2 = g.has_s2 = g.has_c2 = !penalty;
  g.pen_d = g.pen_s = g.pen_c = penalty;
  if (spec_.erm) {
    g.erm_on = true;
    g.erm_alpha = spec_.erm->alpha;
    if (spec_.erm->replaces_product) {
      if (g.friction_uncertain) {
        g.has_c2 = false;
        g.pen_c = false;
      } else {
        g.has_d2 = false;
        g.pen_d = false;
      }
    }
  }

  build_rows();

  const double inf = std::numeric_limits<double>::infinity();
  lower_ = Eigen::VectorXd::Constant(layout_.total, -inf);
  upper_ = Eigen::VectorXd::Constant(layout_.total, inf);
  for (int k = 0; k < layout_.K; ++k) {
    for (int c = 0; c < layout_.nc; ++c) {
      for (int r = 0; r < 4; ++r) {
        lower_[layout_.contact_offset(k, c) + r] = 0.0;
      }
    }
  }
  if (layout_.variable_h) {
    const double hbar = spec_.nominal_h();
    for (int k = 0; k < layout_.K - 1; ++k) {
      lower_[layout_.h_offset(k)] = 0.5 * hbar;
      upper_[layout_.h_offset(k)] = 1.5 * hbar;
    }
  }
}

void TranscribedNlp::build_rows() {
  const int nq = layout_.nq, nv = layout_.nv, nu = layout_.nu,
            nc = layout_.nc, K = layout_.K;
  const int nx = nq + nv;
  rows_per_contact_ = 4 + (group_.has_d2 ? 1 : 0) + (group_.has_s2 ? 2 : 0) +
                      (group_.has_c2 ? 1 : 0);
  ineq_rows_per_knot_ = nc * rows_per_contact_;
  num_ineq_ = K * ineq_rows_per_knot_;
  num_eq_ = 2 * nx + (K - 1) * (nv + nq) + (layout_.variable_h ? 1 : 0);

  eq_row_cols_.assign(num_eq_, {});
  for (int i = 0; i < nx; ++i) {
    eq_row_cols_[i] = {layout_.q_offset(0) + i};
  }
  for (int k = 0; k < K - 1; ++k) {
    std::vector<int> cols;
    cols.reserve(2 * nx + nu + 3 * nc + 1);
    for (int i = 0; i < nx; ++i) cols.push_back(layout_.q_offset(k) + i);
    for (int i = 0; i < nx + nu; ++i) {
      cols.push_back(layout_.q_offset(k + 1) + i);
    }
    for (int c = 0; c < nc; ++c) {
      for (int r = 0; r < 3; ++r) {
        cols.push_back(layout_.lambda_n_offset(k + 1, c) + r);
      }
    }
    if (layout_.variable_h) cols.push_back(layout_.h_offset(k));
    const int base = nx + k * (nv + nq);
    for (int r = 0; r < nv + nq; ++r) eq_row_cols_[base + r] = cols;
  }
  const int fin = nx + (K - 1) * (nv + nq);
  for (int i = 0; i < nx; ++i) {
    eq_row_cols_[fin + i] = {layout_.q_offset(K - 1) + i};
  }
  if (layout_.variable_h) {
    std::vector<int> cols(K - 1);
    for (int k = 0; k < K - 1; ++k) cols[k] = layout_.h_offset(k);
    eq_row_cols_[fin + nx] = cols;
  }

  ineq_row_cols_.assign(num_ineq_, {});
  for (int j = 0; j < K; ++j) {
    std::vector<int> cols;
    cols.reserve(nx + 4 * nc);
    for (int i = 0; i < nx; ++i) cols.push_back(layout_.q_offset(j) + i);
    for (int c = 0; c < nc; ++c) {
      for (int r = 0; r < 4; ++r) {
        cols.push_back(layout_.contact_offset(j, c) + r);
      }
    }
    for (int r = 0; r < ineq_rows_per_knot_; ++r) {
      ineq_row_cols_[j * ineq_rows_per_knot_ + r] = cols;
    }
  }
}

void TranscribedNlp::eval(const Eigen::VectorXd& x, double& cost,
                          Eigen::VectorXd& eq, Eigen::VectorXd& ineq) const {
  if (x.size() != layout_.total) {
    throw std::invalid_argument("eval: iterate length mismatch");
  }
  eq.resize(num_eq_);
  ineq.resize(num_ineq_);
  eval_eq_impl<false>(spec_, layout_, threads_, x, eq, nullptr);
  eval_ineq_impl<false>(spec_, layout_, group_, threads_, ineq_rows_per_knot_,
                        x, ineq, nullptr);
  eval_cost_impl<false>(spec_, layout_, group_, threads_, x, cost, nullptr);
}

void TranscribedNlp::init_derivatives(NlpDerivatives& d) const {
  d.cost_grad = Eigen::VectorXd::Zero(layout_.total);
  d.jac_eq = CsrMatrix::from_pattern(layout_.total, eq_row_cols_);
  d.jac_ineq = CsrMatrix::from_pattern(layout_.total, ineq_row_cols_);
}

void TranscribedNlp::eval_with_derivatives(const Eigen::VectorXd& x,
                                           double& cost, Eigen::VectorXd& eq,
                                           Eigen::VectorXd& ineq,
                                           NlpDerivatives& d) const {
  if (x.size() != layout_.total) {
    throw std::invalid_argument("eval: iterate length mismatch");
  }
  if (d.jac_eq.rows != num_eq_ || d.jac_ineq.rows != num_ineq_ ||
      d.cost_grad.size() != layout_.total) {
    throw std::logic_error(
        "eval_with_derivatives: derivatives not initialized for this problem");
  }
  eq.resize(num_eq_);
  ineq.resize(num_ineq_);
  d.cost_grad.setZero();
  eval_eq_impl<true>(spec_, layout_, threads_, x, eq, &d.jac_eq);
  eval_ineq_impl<true>(spec_, layout_, group_, threads_, ineq_rows_per_knot_,
                       x, ineq, &d.jac_ineq);
  eval_cost_impl<true>(spec_, layout_, group_, threads_, x, cost,
                       &d.cost_grad);
}

bool TranscribedNlp::weighted_hessian(const Eigen::VectorXd& x,
                                      double cost_scale,
                                      const Eigen::VectorXd& w_eq,
                                      const Eigen::VectorXd& w_ineq,
                                      std::vector<HessianEntry>& out) const {
  if (x.size() != layout_.total) {
    throw std::invalid_argument("weighted_hessian: iterate length mismatch");
  }
  if (w_eq.size() != num_eq_ || w_ineq.size() != num_ineq_) {
    throw std::invalid_argument("weighted_hessian: weight length mismatch");
  }
  out.clear();
  hessian_impl(spec_, layout_, group_, ineq_rows_per_knot_, x, cost_scale,
               w_eq, w_ineq, out);
  return true;
}

std::string TranscribedNlp::row_block_name(bool is_equality, int row) const {
  std::ostringstream os;
  if (is_equality) {
    if (row < 0 || row >= num_eq_) return "unknown equality row";
    const int nx = layout_.nq + layout_.nv;
    if (row < nx) return "initial boundary";
    const int per = layout_.nv + layout_.nq;
    const int fin = nx + (layout_.K - 1) * per;
    if (row < fin) {
      const int k = (row - nx) / per;
      const int r = (row - nx) % per;
      os << (r < layout_.nv ? "dynamics" : "position") << " interval " << k;
      return os.str();
    }
    if (row < fin + nx) return "final boundary";
    return "timestep sum";
  }
  if (row < 0 || row >= num_ineq_) return "unknown inequality row";
  const int j = row / ineq_rows_per_knot_;
  int r = row % ineq_rows_per_knot_;
  const int c = r / rows_per_contact_;
  r %= rows_per_contact_;
  os << "knot " << j << " contact " << c << " ";
  static const char* kMargins[] = {"distance", "sliding+", "sliding-", "cone"};
  if (r < 4) {
    os << kMargins[r];
    return os.str();
  }
  r -= 4;
  if (group_.has_d2) {
    if (r == 0) {
      os << "distance product";
      return os.str();
    }
    --r;
  }
  if (group_.has_s2) {
    if (r == 0) {
      os << "sliding+ product";
      return os.str();
    }
    if (r == 1) {
      os << "sliding- product";
      return os.str();
    }
    r -= 2;
  }
  os << "cone product";
  return os.str();
}

TranscribedNlp transcribe(const ProblemSpec& spec, int threads) {
  return TranscribedNlp(spec, threads);
}

SolutionTrajectory unpack_solution(const ProblemSpec& spec,
                                   const Eigen::VectorXd& x) {
  validate(spec);
  const VariableLayout L = VariableLayout::from_spec(spec);
  if (x.size() != L.total) {
    throw std::invalid_argument("unpack_solution: vector length mismatch");
  }
  SolutionTrajectory t;
  t.knot_count = L.K;
  t.q.resize(L.K, L.nq);
  t.v.resize(L.K, L.nv);
  t.u.resize(L.K, L.nu);
  t.lambda_n.resize(L.K, L.nc);
  t.lambda_t.resize(L.K, 2 * L.nc);
  t.gamma.resize(L.K, L.nc);
  t.h.resize(L.K - 1);
  for (int k = 0; k < L.K; ++k) {
    for (int i = 0; i < L.nq; ++i) t.q(k, i) = x[L.q_offset(k) + i];
    for (int i = 0; i < L.nv; ++i) t.v(k, i) = x[L.v_offset(k) + i];
    for (int i = 0; i < L.nu; ++i) t.u(k, i) = x[L.u_offset(k) + i];
    for (int c = 0; c < L.nc; ++c) {
      t.lambda_n(k, c) = x[L.lambda_n_offset(k, c)];
      t.lambda_t(k, 2 * c) = x[L.lambda_t_offset(k, c, 0)];
      t.lambda_t(k, 2 * c + 1) = x[L.lambda_t_offset(k, c, 1)];
      t.gamma(k, c) = x[L.gamma_offset(k, c)];
    }
  }
  for (int k = 0; k < L.K - 1; ++k) {
    t.h[k] = L.variable_h ? x[L.h_offset(k)] : spec.nominal_h();
  }
  return t;
}

Eigen::VectorXd pack_solution(const ProblemSpec& spec,
                              const SolutionTrajectory& traj) {
  validate(spec);
  const VariableLayout L = VariableLayout::from_spec(spec);
  const bool shapes_ok =
      traj.knot_count == L.K && traj.q.rows() == L.K && traj.q.cols() == L.nq &&
      traj.v.rows() == L.K && traj.v.cols() == L.nv && traj.u.rows() == L.K &&
      traj.u.cols() == L.nu && traj.lambda_n.rows() == L.K &&
      traj.lambda_n.cols() == L.nc && traj.lambda_t.rows() == L.K &&
      traj.lambda_t.cols() == 2 * L.nc && traj.gamma.rows() == L.K &&
      traj.gamma.cols() == L.nc && traj.h.size() == L.K - 1;
  if (!shapes_ok) {
    throw std::invalid_argument("pack_solution: trajectory shape mismatch");
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(L.total);
  for (int k = 0; k < L.K; ++k) {
    for (int i = 0; i < L.nq; ++i) x[L.q_offset(k) + i] = traj.q(k, i);
    for (int i = 0; i < L.nv; ++i) x[L.v_offset(k) + i] = traj.v(k, i);
    for (int i = 0; i < L.nu; ++i) x[L.u_offset(k) + i] = traj.u(k, i);
    for (int c = 0; c < L.nc; ++c) {
      x[L.lambda_n_offset(k, c)] = traj.lambda_n(k, c);
      x[L.lambda_t_offset(k, c, 0)] = traj.lambda_t(k, 2 * c);
      x[L.lambda_t_offset(k, c, 1)] = traj.lambda_t(k, 2 * c + 1);
      x[L.gamma_offset(k, c)] = traj.gamma(k, c);
    }
  }
  if (L.variable_h) {
    for (int k = 0; k < L.K - 1; ++k) x[L.h_offset(k)] = traj.h[k];
  }
  return x;
}

}  // namespace rcito
