#pragma once

#include <vector>

#include <Eigen/Dense>

#include "omgpt/motion.hpp"
#include "omgpt/skeleton.hpp"

namespace omgpt::test {

/// Gram-Schmidt written out independently of the library.
inline Eigen::Matrix3d oracle_rotation(const double* six) {
  const Eigen::Vector3d a1(six[0], six[1], six[2]);
  const Eigen::Vector3d a2(six[3], six[4], six[5]);
  const Eigen::Vector3d b1 = a1 / a1.norm();
  Eigen::Vector3d b2 = a2 - b1.dot(a2) * b1;
  b2 /= b2.norm();
  Eigen::Matrix3d m;
  m.col(0) = b1;
  m.col(1) = b2;
  m.col(2) = b1.cross(b2);
  return m;
}

/// Brute force: each joint's world transform is the product of 4x4 local
/// transforms along its root path; no memoisation, no traversal order.
inline std::vector<std::vector<Eigen::Vector3d>> oracle_positions(const MotionSequence& m, const SkeletonGraph& g) {
  std::vector<std::vector<Eigen::Vector3d>> out(m.frames(), std::vector<Eigen::Vector3d>(g.joint_count()));
  for (std::size_t t = 0; t < m.frames(); ++t) {
    const auto T = static_cast<Eigen::Index>(t);
    auto local = [&](int j) {
      Eigen::Matrix4d h = Eigen::Matrix4d::Identity();
      if (j == g.root()) {
        h.topLeftCorner<3, 3>() = oracle_rotation(m.global_rotation.row(T).data());
        h.topRightCorner<3, 1>() = m.global_translation.row(T).transpose();
      } else {
        h.topLeftCorner<3, 3>() = oracle_rotation(m.joint_rotations.row(T).data() + 6 * g.offset_row(j));
        h.topRightCorner<3, 1>() = g.offsets().row(g.offset_row(j)).transpose();
      }
      return h;
    };
    for (std::size_t j = 0; j < g.joint_count(); ++j) {
      std::vector<int> path;
      for (int k = static_cast<int>(j); k != kNoParent; k = g.parent(k)) path.push_back(k);
      Eigen::Matrix4d world = Eigen::Matrix4d::Identity();
      for (auto it = path.rbegin(); it != path.rend(); ++it) world = world * local(*it);
      out[t][j] = (world * Eigen::Vector4d(0, 0, 0, 1)).head<3>();
    }
  }
  return out;
}

}  // namespace omgpt::test
