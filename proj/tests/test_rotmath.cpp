#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "fk_oracle.hpp"
#include "omgpt/error.hpp"
#include "omgpt/rotmath.hpp"
#include "support.hpp"

using namespace omgpt;

TEST(Rotation6D, IdentityColumns) {
  const Eigen::Matrix3d m = rot6d_to_matrix(Rotation6D{});
  EXPECT_TRUE(m.isApprox(Eigen::Matrix3d::Identity(), 1e-15));
}

TEST(Rotation6D, RandomInputsAreProperRotations) {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 2000; ++i) {
    double six[6];
    test::random_six(rng, six);
    const Eigen::Matrix3d m = rot6d_to_matrix(Rotation6D::from_span(six));
    EXPECT_LT((m.transpose() * m - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(m.determinant(), 1.0, 1e-12);
    const Eigen::Matrix3d again = rot6d_to_matrix(matrix_to_rot6d(m));
    EXPECT_LT((again - m).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Rotation6D, FirstColumnKeepsDirectionOfFirstInput) {
  const Rotation6D r{Eigen::Vector3d(0, 0, 5), Eigen::Vector3d(3, 0, 1)};
  const Eigen::Matrix3d m = rot6d_to_matrix(r);
  EXPECT_TRUE(m.col(0).isApprox(Eigen::Vector3d::UnitZ(), 1e-15));
  EXPECT_TRUE(m.col(1).isApprox(Eigen::Vector3d::UnitX(), 1e-15));
  EXPECT_TRUE(m.col(2).isApprox(Eigen::Vector3d::UnitY(), 1e-15));
}

TEST(Rotation6D, DegenerateInputsThrow) {
  auto code = [](const Rotation6D& r) {
    try {
      rot6d_to_matrix(r);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::ConfigError;
  };
  EXPECT_EQ(code({Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitY()}), ErrorCode::DegenerateRotation);
  EXPECT_EQ(code({Eigen::Vector3d::UnitX(), Eigen::Vector3d(2, 0, 0)}), ErrorCode::DegenerateRotation);
}

TEST(Rotation6D, MatrixToRot6dRejectsNonRotations) {
  Eigen::Matrix3d reflect = Eigen::Matrix3d::Identity();
  reflect(2, 2) = -1;
  EXPECT_THROW(matrix_to_rot6d(reflect), Error);
  EXPECT_THROW(matrix_to_rot6d(2.0 * Eigen::Matrix3d::Identity()), Error);
}

TEST(ForwardKinematics, MatchesHomogeneousOracle) {
  std::mt19937_64 rng(9);
  for (int c = 0; c < 40; ++c) {
    const auto g = test::random_skeleton(rng, 2 + static_cast<int>(uniform_index(rng, 30)));
    const auto m = test::random_motion(rng, g, 1 + uniform_index(rng, 8));
    const auto fk = forward_kinematics(m, g);
    const auto oracle = test::oracle_positions(m, g);
    for (std::size_t t = 0; t < m.frames(); ++t) {
      for (std::size_t j = 0; j < g.joint_count(); ++j) {
        EXPECT_LT((fk.at(t, j) - oracle[t][j]).cwiseAbs().maxCoeff(), 1e-10);
      }
    }
  }
}

TEST(ForwardKinematics, RestPoseSumsOffsets) {
  const auto g = load_skeleton(test::data_dir() / "toy_human.json");
  const auto m = MotionSequence::identity(g.name(), 2, g.joint_count());
  const auto fk = forward_kinematics(m, g);
  for (std::size_t j = 0; j < g.joint_count(); ++j) {
    Eigen::Vector3d expect = Eigen::Vector3d::Zero();
    for (int k = static_cast<int>(j); k != g.root(); k = g.parent(k)) expect += g.offset(k);
    EXPECT_LT((fk.at(1, j) - expect).norm(), 1e-15);
  }
}

TEST(ForwardKinematics, EffectorVelocitiesAreForwardDifferences) {
  std::mt19937_64 rng(4);
  const auto g = load_skeleton(test::data_dir() / "smal.json");
  const auto m = test::smooth_motion(rng, g, 12);
  const auto pos = forward_kinematics(m, g);
  const auto vel = end_effector_velocities(m, g);
  ASSERT_EQ(vel.frames, 11u);
  ASSERT_EQ(vel.effectors, 5u);
  for (std::size_t t = 0; t < vel.frames; ++t) {
    for (std::size_t e = 0; e < vel.effectors; ++e) {
      const auto id = static_cast<std::size_t>(g.end_effector_ids()[e]);
      EXPECT_LT((vel.at(t, e) - (pos.at(t + 1, id) - pos.at(t, id))).norm(), 1e-15);
    }
  }
  const auto one = MotionSequence::identity(g.name(), 1, g.joint_count());
  EXPECT_THROW(end_effector_velocities(one, g), Error);
}

TEST(ForwardKinematics, RejectsMismatchedSkeleton) {
  const auto g = load_skeleton(test::data_dir() / "toy_human.json");
  const auto m = MotionSequence::identity("x", 3, g.joint_count() + 1);
  EXPECT_THROW(forward_kinematics(m, g), Error);
}
