#include "rcito/model.hpp"

#include <stdexcept>

#include "rcito/model_kernels.hpp"

namespace rcito {
namespace {

void require_dim(const SystemModel& m, const Eigen::VectorXd& q) {
  if (q.size() != m.nq) {
    throw std::invalid_argument("model: position vector has wrong dimension");
  }
}

}  // namespace

SystemModel make_block_model(double friction_mean) {
  SystemModel m;
  m.type = SystemType::kBlock;
  m.nq = 2;
  m.nv = 2;
  m.nu = 1;
  m.friction_mean = friction_mean;
  m.contact_points = {{Eigen::Vector2d(0.0, -0.5), "corner"}};
  return m;
}

SystemModel make_hopper_model(double friction_mean) {
  SystemModel m;
  m.type = SystemType::kHopper;
  m.nq = 5;
  m.nv = 5;
  m.nu = 3;
  m.friction_mean = friction_mean;
  m.contact_points = {{Eigen::Vector2d(-0.05, 0.0), "heel"},
                      {Eigen::Vector2d(0.15, 0.0), "toe"}};
  return m;
}

Eigen::MatrixXd mass_matrix(const SystemModel& model, const Eigen::VectorXd& q) {
  require_dim(model, q);
  double buf[kernels::kMaxV * kernels::kMaxV];
  kernels::mass_matrix(model, q.data(), buf);
  Eigen::MatrixXd M(model.nv, model.nv);
  for (int i = 0; i < model.nv; ++i)
    for (int j = 0; j < model.nv; ++j) M(i, j) = buf[i * model.nv + j];
  return M;
}

Eigen::VectorXd bias_forces(const SystemModel& model, const Eigen::VectorXd& q,
                            const Eigen::VectorXd& v) {
  require_dim(model, q);
  if (v.size() != model.nv) {
    throw std::invalid_argument("model: velocity vector has wrong dimension");
  }
  double buf[kernels::kMaxV];
  kernels::bias_forces(model, q.data(), v.data(), buf);
  return Eigen::Map<Eigen::VectorXd>(buf, model.nv);
}

std::vector<ContactKinematics> contact_kinematics(const SystemModel& model,
                                                  const Eigen::VectorXd& q) {
  require_dim(model, q);
  std::vector<ContactKinematics> out(model.num_contacts());
  double jn[kernels::kMaxV];
  double jt[2 * kernels::kMaxV];
  for (int c = 0; c < model.num_contacts(); ++c) {
    double phi;
    kernels::contact_kinematics(model, q.data(), c, &phi, jn, jt);
    out[c].phi = phi;
    out[c].j_n = Eigen::Map<Eigen::RowVectorXd>(jn, model.nv);
    out[c].j_t = Eigen::MatrixXd(2, model.nv);
    for (int j = 0; j < model.nv; ++j) {
      out[c].j_t(0, j) = jt[j];
      out[c].j_t(1, j) = jt[model.nv + j];
    }
  }
  return out;
}

Eigen::MatrixXd control_matrix(const SystemModel& model) {
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(model.nv, model.nu);
  if (model.type == SystemType::kBlock) {
    B(0, 0) = 1.0;
    return B;
  }
  B(2, 0) = 1.0;  // hip
  B(3, 1) = 1.0;  // knee
  B(4, 2) = 1.0;  // ankle
  return B;
}

Eigen::Vector2d contact_position(const SystemModel& model,
                                 const Eigen::VectorXd& q, int contact_index) {
  require_dim(model, q);
  if (contact_index < 0 || contact_index >= model.num_contacts()) {
    throw std::invalid_argument("model: contact index out of range");
  }
  double p[2];
  kernels::contact_position(model, q.data(), contact_index, p);
  return Eigen::Vector2d(p[0], p[1]);
}

double potential_energy(const SystemModel& model, const Eigen::VectorXd& q) {
  require_dim(model, q);
  return kernels::potential_energy(model, q.data());
}

}  // namespace rcito
