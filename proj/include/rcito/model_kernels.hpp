#pragma once

#include <cassert>

#include "rcito/fad.hpp"
#include "rcito/model.hpp"

// Scalar-generic evaluation kernels behind the model API.  The same code path
// serves plain doubles and forward-mode duals, so the transcription Jacobians
// differentiate exactly the functions the simulator and tests evaluate.
namespace rcito::kernels {

inline constexpr int kMaxV = 5;  // largest nv among the provided systems

// Writes M(q) row-major into m_out[nv*nv].
template <class T>
void mass_matrix(const SystemModel& m, const T* q, T* m_out) {
  const int nv = m.nv;
  for (int i = 0; i < nv * nv; ++i) m_out[i] = T(0.0);
  if (m.type == SystemType::kBlock) {
    m_out[0] = T(m.block_mass);
    m_out[3] = T(m.block_mass);
    return;
  }
  using fad::cos;
  using fad::sin;
  const double mb = m.base_mass;
  const double ml = m.link_mass;
  const double L = m.link_length;
  const double r = 0.5 * L;
  const double rod_inertia = ml * L * L / 12.0;
  const T s1 = sin(q[2]);
  const T c1 = cos(q[2]);
  const T s2 = sin(q[2] + q[3]);
  const T c2 = cos(q[2] + q[3]);
  // Shank CoM Jacobian column for the hip angle.
  const T ax = L * c1 + r * c2;
  const T ay = L * s1 + r * s2;
  auto at = [&](int i, int j) -> T& { return m_out[i * nv + j]; };
  at(0, 0) = T(mb + 2.0 * ml);
  at(1, 1) = T(mb + 2.0 * ml);
  at(0, 2) = ml * (r * c1) + ml * ax;
  at(1, 2) = ml * (r * s1) + ml * ay;
  at(0, 3) = ml * r * c2;
  at(1, 3) = ml * r * s2;
  at(2, 2) = ml * (r * r) + rod_inertia + ml * (ax * ax + ay * ay) + rod_inertia;
  at(2, 3) = ml * r * (ax * c2 + ay * s2) + rod_inertia;
  at(3, 3) = T(ml * r * r + rod_inertia);
  at(4, 4) = T(m.ankle_armature);
  at(2, 0) = at(0, 2);
  at(2, 1) = at(1, 2);
  at(3, 0) = at(0, 3);
  at(3, 1) = at(1, 3);
  at(3, 2) = at(2, 3);
}

// Writes C(q, v) into c_out[nv]: centripetal terms (joint rates squared) plus
// the gradient of the gravitational potential.
template <class T>
void bias_forces(const SystemModel& m, const T* q, const T* v, T* c_out) {
  const int nv = m.nv;
  for (int i = 0; i < nv; ++i) c_out[i] = T(0.0);
  if (m.type == SystemType::kBlock) {
    c_out[1] = T(m.block_mass * m.gravity);
    return;
  }
  using fad::cos;
  using fad::sin;
  const double g = m.gravity;
  const double mb = m.base_mass;
  const double ml = m.link_mass;
  const double L = m.link_length;
  const double r = 0.5 * L;
  const T s1 = sin(q[2]);
  const T c1 = cos(q[2]);
  const T s2 = sin(q[2] + q[3]);
  const T c2 = cos(q[2] + q[3]);
  const T w1 = v[2];
  const T w2 = v[2] + v[3];
  // CoM accelerations with zero joint acceleration: -sum d * w^2 * u(angle),
  // u(a) = (sin a, -cos a).
  const T at_x = -r * w1 * w1 * s1;
  const T at_y = r * w1 * w1 * c1;
  const T as_x = -L * w1 * w1 * s1 - r * w2 * w2 * s2;
  const T as_y = L * w1 * w1 * c1 + r * w2 * w2 * c2;
  const T ax = L * c1 + r * c2;
  const T ay = L * s1 + r * s2;
  // Thigh CoM Jacobian: [I2 | r*(c1,s1) | 0 | 0]; shank: [I2 | (ax,ay) | r*(c2,s2) | 0].
  c_out[0] = ml * at_x + ml * as_x;
  c_out[1] = ml * at_y + ml * as_y;
  c_out[2] = ml * (r * c1 * at_x + r * s1 * at_y) + ml * (ax * as_x + ay * as_y);
  c_out[3] = ml * (r * c2 * as_x + r * s2 * as_y);
  // Gravity: V = g*(mb*y + ml*y_thigh + ml*y_shank).
  c_out[1] += (mb + 2.0 * ml) * g;
  c_out[2] += ml * g * (r * s1) + ml * g * ay;
  c_out[3] += ml * g * (r * s2);
}

// World position of contact point ci.
template <class T>
void contact_position(const SystemModel& m, const T* q, int ci, T* p_out) {
  if (m.type == SystemType::kBlock) {
    p_out[0] = q[0] + m.contact_points[ci].offset.x();
    p_out[1] = q[1] + m.contact_points[ci].offset.y();
    return;
  }
  using fad::cos;
  using fad::sin;
  const double L = m.link_length;
  const double d = m.contact_points[ci].offset.x();
  const T a2 = q[2] + q[3];
  const T a3 = q[2] + q[3] + q[4];
  p_out[0] = q[0] + L * sin(q[2]) + L * sin(a2) + d * cos(a3);
  p_out[1] = q[1] - L * cos(q[2]) - L * cos(a2) + d * sin(a3);
}

// Distance and contact Jacobians for contact ci: phi = p_y, j_n = d(p_y)/dq,
// j_t rows = +/- d(p_x)/dq.
template <class T>
void contact_kinematics(const SystemModel& m, const T* q, int ci, T* phi,
                        T* j_n, T* j_t) {
  const int nv = m.nv;
  for (int i = 0; i < nv; ++i) {
    j_n[i] = T(0.0);
    j_t[i] = T(0.0);
    j_t[nv + i] = T(0.0);
  }
  if (m.type == SystemType::kBlock) {
    *phi = q[1] + m.contact_points[ci].offset.y();
    j_n[1] = T(1.0);
    j_t[0] = T(1.0);
    j_t[nv] = T(-1.0);
    return;
  }
  using fad::cos;
  using fad::sin;
  const double L = m.link_length;
  const double d = m.contact_points[ci].offset.x();
  const T a2 = q[2] + q[3];
  const T a3 = q[2] + q[3] + q[4];
  const T s1 = sin(q[2]);
  const T c1 = cos(q[2]);
  const T s2 = sin(a2);
  const T c2 = cos(a2);
  const T s3 = sin(a3);
  const T c3 = cos(a3);
  *phi = q[1] - L * c1 - L * c2 + d * s3;
  j_n[1] = T(1.0);
  j_n[2] = L * s1 + L * s2 + d * c3;
  j_n[3] = L * s2 + d * c3;
  j_n[4] = d * c3;
  j_t[0] = T(1.0);
  j_t[2] = L * c1 + L * c2 - d * s3;
  j_t[3] = L * c2 - d * s3;
  j_t[4] = -d * s3;
  for (int i = 0; i < nv; ++i) j_t[nv + i] = -j_t[i];
}

// Gravitational potential (terrain height as zero level).
template <class T>
T potential_energy(const SystemModel& m, const T* q) {
  if (m.type == SystemType::kBlock) {
    return m.block_mass * m.gravity * q[1];
  }
  using fad::cos;
  const double L = m.link_length;
  const double r = 0.5 * L;
  const T y_thigh = q[1] - r * cos(q[2]);
  const T y_shank = q[1] - L * cos(q[2]) - r * cos(q[2] + q[3]);
  return m.gravity *
         (m.base_mass * q[1] + m.link_mass * y_thigh + m.link_mass * y_shank);
}

}  // namespace rcito::kernels
