#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <stdexcept>

#include "oracles.hpp"
#include "rcito/fad.hpp"
#include "rcito/model.hpp"
#include "rcito/model_kernels.hpp"

using rcito::bias_forces;
using rcito::contact_kinematics;
using rcito::contact_position;
using rcito::control_matrix;
using rcito::make_block_model;
using rcito::make_hopper_model;
using rcito::mass_matrix;
using rcito::potential_energy;
using rcito::SystemModel;
namespace fad = rcito::fad;

namespace {

// Link frames reimplemented with explicit 2x2 rotations so kinematics tests
// do not share code with the library's sin/cos expressions.
Eigen::Matrix2d rot(double a) {
  Eigen::Matrix2d r;
  r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  return r;
}

struct HopperFrames {
  Eigen::Vector2d base, knee, ankle, thigh_com, shank_com;
};

HopperFrames hopper_frames(const SystemModel& m, const Eigen::VectorXd& q) {
  // Each link extends along the local "down" axis (0, -1), rotated by the
  // accumulated joint angles.
  HopperFrames f;
  const Eigen::Vector2d down(0.0, -1.0);
  f.base = q.head<2>();
  const Eigen::Vector2d thigh_axis = rot(q[2]) * down;
  const Eigen::Vector2d shank_axis = rot(q[2] + q[3]) * down;
  f.knee = f.base + m.link_length * thigh_axis;
  f.ankle = f.knee + m.link_length * shank_axis;
  f.thigh_com = f.base + 0.5 * m.link_length * thigh_axis;
  f.shank_com = f.knee + 0.5 * m.link_length * shank_axis;
  return f;
}

Eigen::Vector2d hopper_foot_point(const SystemModel& m, const Eigen::VectorXd& q,
                                  int ci) {
  const HopperFrames f = hopper_frames(m, q);
  // Foot axis is the shank's "down" rotated by the ankle to lie flat when all
  // angles are zero; offsets are signed distances along it.
  const Eigen::Vector2d axis = rot(q[2] + q[3] + q[4]) * Eigen::Vector2d(1.0, 0.0);
  return f.ankle + m.contact_points[ci].offset.x() * axis;
}

double hopper_potential(const SystemModel& m, const Eigen::VectorXd& q) {
  const HopperFrames f = hopper_frames(m, q);
  return m.gravity * (m.base_mass * f.base.y() + m.link_mass * f.thigh_com.y() +
                      m.link_mass * f.shank_com.y());
}

// Kinetic energy summed mass by mass, with CoM velocities taken as central
// differences of the frame positions along q + t v.
double hopper_kinetic_fd(const SystemModel& m, const Eigen::VectorXd& q,
                         const Eigen::VectorXd& v) {
  const double h = 1e-6;
  const HopperFrames fp = hopper_frames(m, q + h * v);
  const HopperFrames fm = hopper_frames(m, q - h * v);
  const Eigen::Vector2d vb = (fp.base - fm.base) / (2 * h);
  const Eigen::Vector2d vt = (fp.thigh_com - fm.thigh_com) / (2 * h);
  const Eigen::Vector2d vs = (fp.shank_com - fm.shank_com) / (2 * h);
  const double rod_inertia = m.link_mass * m.link_length * m.link_length / 12.0;
  const double w_thigh = v[2];
  const double w_shank = v[2] + v[3];
  return 0.5 * m.base_mass * vb.squaredNorm() +
         0.5 * m.link_mass * vt.squaredNorm() +
         0.5 * m.link_mass * vs.squaredNorm() +
         0.5 * rod_inertia * (w_thigh * w_thigh + w_shank * w_shank) +
         0.5 * m.ankle_armature * v[4] * v[4];
}

Eigen::VectorXd random_hopper_q(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> upos(-2.0, 2.0);
  std::uniform_real_distribution<double> uh(0.2, 3.0);
  std::uniform_real_distribution<double> uang(-3.0, 3.0);
  Eigen::VectorXd q(5);
  q << upos(rng), uh(rng), uang(rng), uang(rng), uang(rng);
  return q;
}

}  // namespace

TEST_CASE("block: dynamics terms") {
  const SystemModel m = make_block_model();
  Eigen::VectorXd q(2), v(2);
  q << 2.0, 0.7;
  v << -1.0, 0.4;
  const Eigen::MatrixXd M = mass_matrix(m, q);
  CHECK(M.rows() == 2);
  CHECK((M - Eigen::Matrix2d::Identity()).norm() == 0.0);
  const Eigen::VectorXd c = bias_forces(m, q, v);
  CHECK(c[0] == 0.0);
  CHECK(c[1] == doctest::Approx(9.81));
  const Eigen::MatrixXd B = control_matrix(m);
  CHECK(B.rows() == 2);
  CHECK(B.cols() == 1);
  CHECK(B(0, 0) == 1.0);
  CHECK(B(1, 0) == 0.0);
  CHECK(potential_energy(m, q) == doctest::Approx(9.81 * 0.7));
}

TEST_CASE("block: contact geometry") {
  const SystemModel m = make_block_model();
  REQUIRE(m.num_contacts() == 1);
  Eigen::VectorXd q(2);
  q << 2.0, 0.7;
  const Eigen::Vector2d p = contact_position(m, q, 0);
  CHECK(p.x() == doctest::Approx(2.0));
  CHECK(p.y() == doctest::Approx(0.2));
  const auto ck = contact_kinematics(m, q);
  REQUIRE(ck.size() == 1);
  CHECK(ck[0].phi == doctest::Approx(0.2));
  CHECK(ck[0].j_n[0] == 0.0);
  CHECK(ck[0].j_n[1] == 1.0);
  CHECK(ck[0].j_t(0, 0) == 1.0);
  CHECK(ck[0].j_t(1, 0) == -1.0);
  CHECK(ck[0].j_t(0, 1) == 0.0);
}

TEST_CASE("hopper: factory shape") {
  const SystemModel m = make_hopper_model();
  CHECK(m.nq == 5);
  CHECK(m.nv == 5);
  CHECK(m.nu == 3);
  CHECK(m.state_dim() == 10);
  REQUIRE(m.num_contacts() == 2);
  CHECK(m.contact_points[0].offset.x() == doctest::Approx(-0.05));
  CHECK(m.contact_points[1].offset.x() == doctest::Approx(0.15));
  const Eigen::MatrixXd B = control_matrix(m);
  REQUIRE(B.rows() == 5);
  REQUIRE(B.cols() == 3);
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(5, 3);
  expected(2, 0) = expected(3, 1) = expected(4, 2) = 1.0;
  CHECK((B - expected).norm() == 0.0);
}

TEST_CASE("hopper: straight leg touches the ground") {
  const SystemModel m = make_hopper_model();
  Eigen::VectorXd q(5);
  q << 0.3, 1.5, 0.0, 0.0, 0.0;
  const auto ck = contact_kinematics(m, q);
  REQUIRE(ck.size() == 2);
  CHECK(std::abs(ck[0].phi) <= 1e-15);
  CHECK(std::abs(ck[1].phi) <= 1e-15);
  const Eigen::Vector2d heel = contact_position(m, q, 0);
  const Eigen::Vector2d toe = contact_position(m, q, 1);
  CHECK(heel.x() == doctest::Approx(0.25));
  CHECK(std::abs(heel.y()) <= 1e-15);
  CHECK(toe.x() == doctest::Approx(0.45));
  CHECK(std::abs(toe.y()) <= 1e-15);
}

TEST_CASE("hopper: foot points match rotation-matrix kinematics") {
  const SystemModel m = make_hopper_model();
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd q = random_hopper_q(rng);
    for (int ci = 0; ci < 2; ++ci) {
      const Eigen::Vector2d got = contact_position(m, q, ci);
      const Eigen::Vector2d want = hopper_foot_point(m, q, ci);
      CAPTURE(trial);
      CAPTURE(ci);
      CHECK((got - want).norm() <= 1e-12);
    }
  }
}

TEST_CASE("hopper: mass matrix symmetric positive definite") {
  const SystemModel m = make_hopper_model();
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd q = random_hopper_q(rng);
    const Eigen::MatrixXd M = mass_matrix(m, q);
    CHECK((M - M.transpose()).norm() <= 1e-14);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("hopper: mass matrix reproduces summed kinetic energy") {
  const SystemModel m = make_hopper_model();
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> uv(-5.0, 5.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd q = random_hopper_q(rng);
    Eigen::VectorXd v(5);
    for (int i = 0; i < 5; ++i) v[i] = uv(rng);
    const double from_m = 0.5 * v.dot(mass_matrix(m, q) * v);
    const double summed = hopper_kinetic_fd(m, q, v);
    CAPTURE(trial);
    CHECK(std::abs(from_m - summed) <=
          1e-8 * std::max(1.0, std::abs(summed)));
  }
}

TEST_CASE("hopper: potential matches frame-based sum") {
  const SystemModel m = make_hopper_model();
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd q = random_hopper_q(rng);
    CHECK(std::abs(potential_energy(m, q) - hopper_potential(m, q)) <= 1e-10);
  }
}

TEST_CASE("hopper: bias matches energy-derivative identity") {
  // c(q, v) = Mdot v - (1/2) d/dq (v^T M v) + dV/dq, with the derivatives on
  // the right taken by finite differences of M and the frame-based potential.
  const SystemModel m = make_hopper_model();
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> uv(-4.0, 4.0);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::VectorXd q = random_hopper_q(rng);
    Eigen::VectorXd v(5);
    for (int i = 0; i < 5; ++i) v[i] = uv(rng);

    const Eigen::MatrixXd dMv_dq = oracles::fd_jacobian(
        [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
          return mass_matrix(m, x) * v;
        },
        q);
    const Eigen::VectorXd quad_grad = oracles::fd_gradient(
        [&](const Eigen::VectorXd& x) {
          return v.dot(mass_matrix(m, x) * v);
        },
        q);
    const Eigen::VectorXd grav_grad = oracles::fd_gradient(
        [&](const Eigen::VectorXd& x) { return hopper_potential(m, x); }, q);

    const Eigen::VectorXd want = dMv_dq * v - 0.5 * quad_grad + grav_grad;
    const Eigen::VectorXd got = bias_forces(m, q, v);
    CAPTURE(trial);
    CHECK(oracles::max_rel_error(got, want) <= 1e-6);
  }
}

TEST_CASE("hopper: zero velocity bias is the gravity gradient") {
  const SystemModel m = make_hopper_model();
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::VectorXd q = random_hopper_q(rng);
    const Eigen::VectorXd got = bias_forces(m, q, Eigen::VectorXd::Zero(5));
    const Eigen::VectorXd want = oracles::fd_gradient(
        [&](const Eigen::VectorXd& x) { return hopper_potential(m, x); }, q);
    CHECK(oracles::max_rel_error(got, want) <= 1e-6);
  }
}

TEST_CASE("hopper: contact Jacobians differentiate the foot points") {
  const SystemModel m = make_hopper_model();
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd q = random_hopper_q(rng);
    const auto ck = contact_kinematics(m, q);
    for (int ci = 0; ci < 2; ++ci) {
      const Eigen::MatrixXd dp = oracles::fd_jacobian(
          [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
            return hopper_foot_point(m, x, ci);
          },
          q);
      CAPTURE(trial);
      CAPTURE(ci);
      CHECK(oracles::max_rel_error(ck[ci].j_n, dp.row(1)) <= 1e-6);
      CHECK(oracles::max_rel_error(ck[ci].j_t.row(0), dp.row(0)) <= 1e-6);
      CHECK(oracles::max_rel_error(ck[ci].j_t.row(1), -dp.row(0)) <= 1e-6);
      CHECK(std::abs(ck[ci].phi - hopper_foot_point(m, q, ci).y()) <= 1e-12);
    }
  }
}

TEST_CASE("kernels: dual tangents match finite differences") {
  const SystemModel m = make_hopper_model();
  std::mt19937_64 rng(37);
  const Eigen::VectorXd q0 = random_hopper_q(rng);

  fad::ScopedWidth width(5);
  std::array<fad::Dual, 5> q;
  for (int i = 0; i < 5; ++i) {
    q[i] = fad::Dual(q0[i]);
    q[i].seed(i);
  }

  std::array<fad::Dual, 25> M;
  rcito::kernels::mass_matrix(m, q.data(), M.data());
  for (int col = 0; col < 5; ++col) {
    const Eigen::MatrixXd fd = oracles::fd_jacobian(
        [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
          return mass_matrix(m, x).col(col);
        },
        q0);
    Eigen::MatrixXd ad(5, 5);
    for (int row = 0; row < 5; ++row) {
      for (int k = 0; k < 5; ++k) ad(row, k) = M[row * 5 + col].d[k];
    }
    CHECK(oracles::max_rel_error(ad, fd) <= 1e-6);
  }

  // The dual tangent of phi must equal the analytic normal row.
  for (int ci = 0; ci < 2; ++ci) {
    fad::Dual phi;
    std::array<fad::Dual, 5> jn;
    std::array<fad::Dual, 10> jt;
    rcito::kernels::contact_kinematics(m, q.data(), ci, &phi, jn.data(),
                                       jt.data());
    for (int k = 0; k < 5; ++k) {
      CHECK(std::abs(phi.d[k] - jn[k].v) <= 1e-13);
    }
  }
}

TEST_CASE("dimension mismatches are rejected") {
  const SystemModel m = make_hopper_model();
  Eigen::VectorXd q3 = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd q5 = Eigen::VectorXd::Zero(5);
  q5[1] = 1.5;
  CHECK_THROWS_AS(mass_matrix(m, q3), std::invalid_argument);
  CHECK_THROWS_AS(bias_forces(m, q5, q3), std::invalid_argument);
  CHECK_THROWS_AS(contact_kinematics(m, q3), std::invalid_argument);
  CHECK_THROWS_AS(contact_position(m, q3, 0), std::invalid_argument);
  CHECK_THROWS_AS(contact_position(m, q5, 7), std::invalid_argument);
  CHECK_THROWS_AS(potential_energy(m, q3), std::invalid_argument);
}
