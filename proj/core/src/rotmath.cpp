#include "omgpt/rotmath.hpp"

#include <cmath>
#include <string>

#include <Eigen/Geometry>
#include <Eigen/LU>

#include "omgpt/error.hpp"

namespace omgpt {

Eigen::Matrix3d rot6d_to_matrix(const Rotation6D& r) {
  if (!r.a1.allFinite() || !r.a2.allFinite()) fail(ErrorCode::DegenerateRotation, "non-finite 6D input");
  const double n1 = r.a1.norm();
  if (n1 < kDegenerateNorm) fail(ErrorCode::DegenerateRotation, "first column vanishes");
  const Eigen::Vector3d b1 = r.a1 / n1;
  const Eigen::Vector3d u = r.a2 - b1.dot(r.a2) * b1;
  const double n2 = u.norm();
  if (n2 < kDegenerateNorm) fail(ErrorCode::DegenerateRotation, "second column parallel to first");
  const Eigen::Vector3d b2 = u / n2;
  Eigen::Matrix3d m;
  m.col(0) = b1;
  m.col(1) = b2;
  m.col(2) = b1.cross(b2);
  return m;
}

Rotation6D matrix_to_rot6d(const Eigen::Matrix3d& m) {
  constexpr double tol = 1e-6;
  if (!m.allFinite()) fail(ErrorCode::NotARotation, "non-finite matrix");
  const double ortho = (m.transpose() * m - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho > tol) fail(ErrorCode::NotARotation, "columns not orthonormal (error " + std::to_string(ortho) + ")");
  const double det = m.determinant();
  if (std::abs(det - 1.0) > tol) fail(ErrorCode::NotARotation, "determinant " + std::to_string(det));
  return {m.col(0), m.col(1)};
}

JointPositions forward_kinematics(const MotionSequence& motion, const SkeletonGraph& graph) {
  const std::size_t joints = graph.joint_count();
  if (motion.joint_count() != joints) {
    fail(ErrorCode::SkeletonMismatch, "motion has " + std::to_string(motion.joint_count()) +
                                          " joints, skeleton '" + graph.name() + "' has " +
                                          std::to_string(joints));
  }
  const std::size_t frames = motion.frames();
  JointPositions out{frames, joints, std::vector<Eigen::Vector3d>(frames * joints)};
  std::vector<Eigen::Matrix3d> world(joints);
  const int root = graph.root();

  for (std::size_t t = 0; t < frames; ++t) {
    const auto T = static_cast<Eigen::Index>(t);
    for (int j : graph.topological_order()) {
      const auto ju = static_cast<std::size_t>(j);
      if (j == root) {
        world[ju] = rot6d_to_matrix(Rotation6D::from_span(motion.global_rotation.row(T).data()));
        out.at(t, ju) = motion.global_translation.row(T).transpose();
        continue;
      }
      const auto p = static_cast<std::size_t>(graph.parent(j));
      const double* six = motion.joint_rotations.row(T).data() + 6 * graph.offset_row(j);
      world[ju] = world[p] * rot6d_to_matrix(Rotation6D::from_span(six));
      out.at(t, ju) = out.at(t, p) + world[p] * graph.offset(j);
    }
  }
  return out;
}

EndEffectorVelocities end_effector_velocities(const MotionSequence& motion, const SkeletonGraph& graph) {
  if (motion.frames() < 2) fail(ErrorCode::TooFewFrames, "velocities need at least two frames");
  const JointPositions pos = forward_kinematics(motion, graph);
  const auto effectors = graph.end_effector_ids();
  EndEffectorVelocities v{pos.frames - 1, effectors.size(), {}};
  v.velocities.reserve(v.frames * v.effectors);
  for (std::size_t t = 0; t + 1 < pos.frames; ++t) {
    for (int e : effectors) {
      const auto eu = static_cast<std::size_t>(e);
      v.velocities.push_back(pos.at(t + 1, eu) - pos.at(t, eu));
    }
  }
  return v;
}

}  // namespace omgpt
