#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "omgpt/config.hpp"
#include "omgpt/motion.hpp"
#include "omgpt/random.hpp"
#include "omgpt/skeleton.hpp"

namespace omgpt::test {

inline std::filesystem::path data_dir() { return OMGPT_TEST_DATA_DIR; }
inline std::filesystem::path config_dir() { return OMGPT_TEST_CONFIG_DIR; }

inline RunConfig toy_config() { return load_config(config_dir() / "toy.cfg"); }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("omgpt_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline double normal(std::mt19937_64& rng) {
  // Box-Muller on the portable uniform draw
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

/// Random tree: joint j > 0 hangs under a random earlier joint; every leaf is an end effector.
inline SkeletonGraph random_skeleton(std::mt19937_64& rng, int joints) {
  std::vector<std::string> names;
  std::vector<int> parents{kNoParent};
  for (int j = 0; j < joints; ++j) names.push_back("j" + std::to_string(j));
  for (int j = 1; j < joints; ++j) parents.push_back(static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(j))));
  SkeletonGraph::OffsetMatrix offsets(joints - 1, 3);
  for (Eigen::Index r = 0; r < offsets.rows(); ++r) {
    for (int c = 0; c < 3; ++c) offsets(r, c) = uniform(rng, -0.5, 0.5);
  }
  std::vector<bool> has_child(static_cast<std::size_t>(joints), false);
  for (int j = 1; j < joints; ++j) has_child[static_cast<std::size_t>(parents[static_cast<std::size_t>(j)])] = true;
  std::vector<int> leaves;
  for (int j = 1; j < joints; ++j) {
    if (!has_child[static_cast<std::size_t>(j)]) leaves.push_back(j);
  }
  return build_skeleton("random", names, parents, offsets, leaves);
}

inline void random_six(std::mt19937_64& rng, double* out) {
  for (int k = 0; k < 6; ++k) out[k] = normal(rng);
}

/// Arbitrary (non-orthonormal) 6D channels and translations.
inline MotionSequence random_motion(std::mt19937_64& rng, const SkeletonGraph& g, std::size_t frames) {
  MotionSequence m = MotionSequence::identity(g.name(), frames, g.joint_count());
  for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(frames); ++t) {
    random_six(rng, m.global_rotation.row(t).data());
    for (int c = 0; c < 3; ++c) m.global_translation(t, c) = uniform(rng, -1.0, 1.0);
    for (Eigen::Index r = 0; r + 1 < static_cast<Eigen::Index>(g.joint_count()); ++r) {
      random_six(rng, m.joint_rotations.row(t).data() + 6 * r);
    }
  }
  return m;
}

/// Smooth small-angle motion that stays well inside the rotation manifold.
inline MotionSequence smooth_motion(std::mt19937_64& rng, const SkeletonGraph& g, std::size_t frames) {
  MotionSequence m = MotionSequence::identity(g.name(), frames, g.joint_count());
  const std::size_t channels = g.joint_count();
  std::vector<Eigen::Vector3d> axis(channels), phase(channels);
  for (std::size_t j = 0; j < channels; ++j) {
    axis[j] = Eigen::Vector3d(normal(rng), normal(rng), normal(rng)).normalized();
    phase[j] = Eigen::Vector3d(uniform(rng, 0, 6.28), uniform(rng, 0.05, 0.2), uniform(rng, 0.2, 0.6));
  }
  auto write = [](const Eigen::Matrix3d& r, double* six) {
    for (int k = 0; k < 3; ++k) {
      six[k] = r(k, 0);
      six[3 + k] = r(k, 1);
    }
  };
  for (std::size_t t = 0; t < frames; ++t) {
    const auto T = static_cast<Eigen::Index>(t);
    for (std::size_t j = 0; j < channels; ++j) {
      const double angle = phase[j].z() * std::sin(phase[j].x() + phase[j].y() * static_cast<double>(t));
      const Eigen::Matrix3d r = Eigen::AngleAxisd(angle, axis[j]).toRotationMatrix();
      if (j == 0) {
        write(r, m.global_rotation.row(T).data());
      } else {
        write(r, m.joint_rotations.row(T).data() + 6 * (j - 1));
      }
    }
    m.global_translation.row(T) = Eigen::RowVector3d(0.02 * static_cast<double>(t), 0.9, 0.0);
  }
  return m;
}

}  // namespace omgpt::test
