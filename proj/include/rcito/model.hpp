#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

// Planar rigid-body systems: a sliding block (point mass, one contact) and a
// five-DoF single-legged hopper (floating base, hip/knee/ankle, heel and toe
// contacts).  Terrain is flat at height 0 with outward normal +y.
namespace rcito {

struct ContactPoint {
  // Offset of the collision point in its carrying frame: relative to the CoM
  // for the block, along the foot axis from the ankle for the hopper.
  Eigen::Vector2d offset;
  std::string name;
};

enum class SystemType { kBlock, kHopper };

struct SystemModel {
  SystemType type = SystemType::kBlock;
  int nq = 0;  // = nv for both systems
  int nv = 0;
  int nu = 0;
  std::vector<ContactPoint> contact_points;
  double gravity = 9.81;
  double friction_mean = 0.5;

  // Block parameters.
  double block_mass = 1.0;

  // Hopper parameters.
  double base_mass = 10.0;
  double link_mass = 1.0;    // thigh and shank, uniform rods
  double link_length = 0.75;
  // Rotor inertia on the ankle joint.  The foot itself is massless; without
  // this term the ankle row of M would vanish and M would lose definiteness.
  double ankle_armature = 0.01;

  int num_contacts() const { return static_cast<int>(contact_points.size()); }
  int state_dim() const { return nq + nv; }
};

// 1 kg point mass with coordinates [x, y] of the CoM, one actuator applying a
// horizontal force, and a single contact 0.5 m below the CoM.
SystemModel make_block_model(double friction_mean = 0.5);

// Floating base [x, y] plus hip, knee, and ankle angles; torques on the three
// joints; contacts at the heel and toe of a massless foot.  Straight leg
// (all angles zero) puts the base 1.5 m above the heel.
SystemModel make_hopper_model(double friction_mean = 0.5);

struct State {
  Eigen::VectorXd q;
  Eigen::VectorXd v;
};

struct ContactKinematics {
  double phi = 0.0;           // vertical distance to the terrain
  Eigen::RowVectorXd j_n;     // d(phi)/dq, 1 x nv
  Eigen::MatrixXd j_t;        // +x and -x tangential rows, 2 x nv
};

Eigen::MatrixXd mass_matrix(const SystemModel& model, const Eigen::VectorXd& q);

// C(q, v) on the left of the dynamics M dv/dt + C = B u + J^T lambda:
// Coriolis/centripetal terms plus the gradient of gravitational potential.
Eigen::VectorXd bias_forces(const SystemModel& model, const Eigen::VectorXd& q,
                            const Eigen::VectorXd& v);

std::vector<ContactKinematics> contact_kinematics(const SystemModel& model,
                                                  const Eigen::VectorXd& q);

Eigen::MatrixXd control_matrix(const SystemModel& model);

// World position of one contact point; used by tests and metrics.
Eigen::Vector2d contact_position(const SystemModel& model,
                                 const Eigen::VectorXd& q, int contact_index);

// Gravitational potential energy (zero level at terrain height).
double potential_energy(const SystemModel& model, const Eigen::VectorXd& q);

}  // namespace rcito
