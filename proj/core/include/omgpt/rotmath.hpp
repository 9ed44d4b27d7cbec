#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "omgpt/motion.hpp"
#include "omgpt/skeleton.hpp"

namespace omgpt {

/// First two columns of a rotation matrix, before orthonormalization.
struct Rotation6D {
  Eigen::Vector3d a1 = Eigen::Vector3d::UnitX();
  Eigen::Vector3d a2 = Eigen::Vector3d::UnitY();

  static Rotation6D from_span(const double* six) {
    return {Eigen::Vector3d(six[0], six[1], six[2]), Eigen::Vector3d(six[3], six[4], six[5])};
  }
};

inline constexpr double kDegenerateNorm = 1e-8;

/// Gram-Schmidt: b1 = a1/|a1|, b2 = normalized a2 minus its b1 component,
/// b3 = b1 x b2; returns the matrix with columns (b1, b2, b3).
/// Throws DegenerateRotation when a1 vanishes or a2 is parallel to a1.
Eigen::Matrix3d rot6d_to_matrix(const Rotation6D& r);

/// Throws NotARotation unless m is orthonormal with det +1 (tolerance 1e-6).
Rotation6D matrix_to_rot6d(const Eigen::Matrix3d& m);

/// World-space joint positions, frame-major.
struct JointPositions {
  std::size_t frames = 0;
  std::size_t joints = 0;
  std::vector<Eigen::Vector3d> positions;

  const Eigen::Vector3d& at(std::size_t t, std::size_t j) const { return positions[t * joints + j]; }
  Eigen::Vector3d& at(std::size_t t, std::size_t j) { return positions[t * joints + j]; }
};

/// Per-frame forward-difference velocities of the end effectors, in metres/frame.
struct EndEffectorVelocities {
  std::size_t frames = 0;  // T - 1
  std::size_t effectors = 0;
  std::vector<Eigen::Vector3d> velocities;

  const Eigen::Vector3d& at(std::size_t t, std::size_t e) const { return velocities[t * effectors + e]; }
};

JointPositions forward_kinematics(const MotionSequence& motion, const SkeletonGraph& graph);

EndEffectorVelocities end_effector_velocities(const MotionSequence& motion, const SkeletonGraph& graph);

}  // namespace omgpt
