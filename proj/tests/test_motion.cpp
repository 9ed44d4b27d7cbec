#include <gtest/gtest.h>

#include "omgpt/error.hpp"
#include "omgpt/motion.hpp"
#include "omgpt/rotmath.hpp"
#include "support.hpp"

using namespace omgpt;

TEST(Motion, DynamicTensorLayout) {
  std::mt19937_64 rng(1);
  const auto g = load_skeleton(test::data_dir() / "toy_animal.json");
  const auto m = test::random_motion(rng, g, 4);
  const auto d = dynamic_tensor(m);
  const std::size_t rows = g.joint_count() + 1;
  ASSERT_EQ(d.size(), 4 * rows * 6);
  for (std::size_t t = 0; t < 4; ++t) {
    const auto T = static_cast<Eigen::Index>(t);
    const double* f = d.data() + t * rows * 6;
    for (int k = 0; k < 6; ++k) EXPECT_EQ(f[k], m.global_rotation(T, k));
    for (int k = 0; k < 3; ++k) EXPECT_EQ(f[6 + k], m.global_translation(T, k));
    for (int k = 3; k < 6; ++k) EXPECT_EQ(f[6 + k], 0.0);
    for (std::size_t j = 0; j < g.joint_count(); ++j) {
      const int joint = static_cast<int>(j);
      if (joint == g.root()) continue;
      const auto row = static_cast<std::size_t>(g.dynamic_row(joint));
      for (int k = 0; k < 6; ++k) {
        EXPECT_EQ(f[row * 6 + static_cast<std::size_t>(k)], m.joint_rotations(T, 6 * g.offset_row(joint) + k));
      }
    }
  }
  const auto back = motion_from_dynamic(d, 4, g.joint_count(), m.skeleton, m.caption, m.mask);
  EXPECT_EQ(back, m);
}

TEST(Motion, PaddingRepeatsLastFrameAndMarksIt) {
  std::mt19937_64 rng(2);
  const auto g = load_skeleton(test::data_dir() / "toy_human.json");
  const auto m = test::random_motion(rng, g, 5);
  const auto p = pad_motion(m, 9);
  ASSERT_EQ(p.frames(), 9u);
  EXPECT_EQ(p.real_frames(), 5u);
  for (Eigen::Index t = 5; t < 9; ++t) {
    EXPECT_EQ(p.mask[static_cast<std::size_t>(t)], 0);
    EXPECT_EQ(p.global_rotation.row(t), m.global_rotation.row(4));
    EXPECT_EQ(p.joint_rotations.row(t), m.joint_rotations.row(4));
  }
  EXPECT_EQ(pad_motion(m, 3), m);
}

TEST(Motion, OrthonormalizedIsAFixedPoint) {
  std::mt19937_64 rng(3);
  const auto g = load_skeleton(test::data_dir() / "smpl.json");
  const auto once = orthonormalized(test::random_motion(rng, g, 6));
  const auto twice = orthonormalized(once);
  EXPECT_LT((once.joint_rotations - twice.joint_rotations).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((once.global_rotation - twice.global_rotation).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Motion, ValidateChecksRangeAndShape) {
  std::mt19937_64 rng(4);
  const auto g = load_skeleton(test::data_dir() / "toy_human.json");
  const auto m = test::smooth_motion(rng, g, 30);
  EXPECT_NO_THROW(validate_motion(m, g, {20, 196}));
  EXPECT_THROW(validate_motion(m, g, {40, 196}), Error);
  auto wrong = MotionSequence::identity(g.name(), 30, g.joint_count() + 1);
  EXPECT_THROW(validate_motion(wrong, g, {20, 196}), Error);
  auto nan = m;
  nan.global_translation(3, 1) = std::nan("");
  EXPECT_THROW(validate_motion(nan, g, {20, 196}), Error);
  auto degenerate = m;
  degenerate.joint_rotations.row(2).head(6).setZero();
  EXPECT_THROW(validate_motion(degenerate, g, {20, 196}), Error);
}
