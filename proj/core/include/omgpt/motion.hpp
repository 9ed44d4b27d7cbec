#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace omgpt {

class SkeletonGraph;

/// Accepted frame counts for a dataset.
struct FrameRange {
  std::size_t min_frames = 1;
  std::size_t max_frames = 196;
};

inline constexpr FrameRange kHumanFrames{20, 196};
inline constexpr FrameRange kAnimalFrames{10, 196};

/// Skeletal motion: global rotation, global translation and per-joint local
/// rotations, all per frame. Rotations use the 6D (two-column) encoding.
///
/// `mask[t]` is 1 for captured frames and 0 for padding appended to reach a
/// fixed length; padding frames repeat the last real frame.
struct MotionSequence {
  using RotationRows = Eigen::Matrix<double, Eigen::Dynamic, 6, Eigen::RowMajor>;
  using TranslationRows = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
  // T x ((J-1) * 6), joints in offset-row order.
  using JointRotations = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  std::string skeleton;
  std::string caption;
  RotationRows global_rotation;
  TranslationRows global_translation;
  JointRotations joint_rotations;
  std::vector<std::uint8_t> mask;

  std::size_t frames() const { return static_cast<std::size_t>(global_rotation.rows()); }
  std::size_t joint_count() const { return static_cast<std::size_t>(joint_rotations.cols() / 6) + 1; }
  std::size_t real_frames() const;

  /// Allocates identity rotations, zero translation and an all-real mask.
  static MotionSequence identity(std::string skeleton, std::size_t frames, std::size_t joints);

  bool operator==(const MotionSequence& other) const;
};

/// Row-major T x (J+1) x 6 dynamic tensor: row 0 global rotation, row 1 the
/// translation padded with three zeros, rows 2.. the joint rotations.
std::vector<double> dynamic_tensor(const MotionSequence& motion);

/// Inverse of dynamic_tensor(); the three translation padding channels are dropped.
MotionSequence motion_from_dynamic(std::span<const double> dynamic, std::size_t frames, std::size_t joints,
                                   std::string skeleton, std::string caption, std::vector<std::uint8_t> mask);

/// Right-pads to `frames` by repeating the last frame, marking the copies as padding.
/// Sequences already at least that long are returned unchanged.
MotionSequence pad_motion(const MotionSequence& motion, std::size_t frames);

/// Re-projects every 6D channel onto the rotation manifold (matrix round trip).
MotionSequence orthonormalized(const MotionSequence& motion);

/// Checks shape against the skeleton, frame range, finiteness and 6D validity.
/// Throws SkeletonMismatch, ValidationError or DegenerateRotation.
void validate_motion(const MotionSequence& motion, const SkeletonGraph& graph, FrameRange range);

}  // namespace omgpt
