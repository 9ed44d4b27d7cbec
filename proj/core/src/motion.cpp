#include "omgpt/motion.hpp"

#include <algorithm>
#include <numeric>

#include "omgpt/error.hpp"
#include "omgpt/rotmath.hpp"
#include "omgpt/skeleton.hpp"

namespace omgpt {

std::size_t MotionSequence::real_frames() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

MotionSequence MotionSequence::identity(std::string skeleton, std::size_t frames, std::size_t joints) {
  const auto T = static_cast<Eigen::Index>(frames);
  MotionSequence m;
  m.skeleton = std::move(skeleton);
  m.global_rotation.resize(T, 6);
  m.global_translation = TranslationRows::Zero(T, 3);
  m.joint_rotations.resize(T, static_cast<Eigen::Index>((joints - 1) * 6));
  const double ident[6] = {1, 0, 0, 0, 1, 0};
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index c = 0; c < 6; ++c) m.global_rotation(t, c) = ident[c];
    for (Eigen::Index c = 0; c < m.joint_rotations.cols(); ++c) m.joint_rotations(t, c) = ident[c % 6];
  }
  m.mask.assign(frames, 1);
  return m;
}

bool MotionSequence::operator==(const MotionSequence& o) const {
  return skeleton == o.skeleton && caption == o.caption && mask == o.mask &&
         global_rotation.rows() == o.global_rotation.rows() && global_rotation == o.global_rotation &&
         global_translation.rows() == o.global_translation.rows() &&
         global_translation == o.global_translation && joint_rotations.rows() == o.joint_rotations.rows() &&
         joint_rotations.cols() == o.joint_rotations.cols() && joint_rotations == o.joint_rotations;
}

std::vector<double> dynamic_tensor(const MotionSequence& m) {
  const std::size_t T = m.frames();
  const std::size_t rows = m.joint_count() + 1;
  std::vector<double> d(T * rows * 6, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    double* frame = d.data() + t * rows * 6;
    for (int c = 0; c < 6; ++c) frame[c] = m.global_rotation(ti, c);
    for (int c = 0; c < 3; ++c) frame[6 + c] = m.global_translation(ti, c);
    std::copy_n(m.joint_rotations.row(ti).data(), m.joint_rotations.cols(), frame + 12);
  }
  return d;
}

MotionSequence motion_from_dynamic(std::span<const double> dynamic, std::size_t frames, std::size_t joints,
                                   std::string skeleton, std::string caption, std::vector<std::uint8_t> mask) {
  const std::size_t rows = joints + 1;
  if (dynamic.size() != frames * rows * 6) {
    fail(ErrorCode::ShapeMismatch, "dynamic tensor has " + std::to_string(dynamic.size()) +
                                       " values, expected " + std::to_string(frames * rows * 6));
  }
  if (mask.empty()) mask.assign(frames, 1);
  if (mask.size() != frames) fail(ErrorCode::ShapeMismatch, "mask length differs from frame count");
  MotionSequence m = MotionSequence::identity(std::move(skeleton), frames, joints);
  m.caption = std::move(caption);
  m.mask = std::move(mask);
  for (std::size_t t = 0; t < frames; ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    const double* frame = dynamic.data() + t * rows * 6;
    for (int c = 0; c < 6; ++c) m.global_rotation(ti, c) = frame[c];
    for (int c = 0; c < 3; ++c) m.global_translation(ti, c) = frame[6 + c];
    std::copy_n(frame + 12, m.joint_rotations.cols(), m.joint_rotations.row(ti).data());
  }
  return m;
}

MotionSequence pad_motion(const MotionSequence& m, std::size_t frames) {
  if (m.frames() >= frames || m.frames() == 0) return m;
  MotionSequence out = m;
  const auto T = static_cast<Eigen::Index>(m.frames());
  const auto F = static_cast<Eigen::Index>(frames);
  out.global_rotation.conservativeResize(F, Eigen::NoChange);
  out.global_translation.conservativeResize(F, Eigen::NoChange);
  out.joint_rotations.conservativeResize(F, Eigen::NoChange);
  for (Eigen::Index t = T; t < F; ++t) {
    out.global_rotation.row(t) = m.global_rotation.row(T - 1);
    out.global_translation.row(t) = m.global_translation.row(T - 1);
    out.joint_rotations.row(t) = m.joint_rotations.row(T - 1);
  }
  out.mask.resize(frames, 0);
  return out;
}

MotionSequence orthonormalized(const MotionSequence& m) {
  MotionSequence out = m;
  auto fix = [](double* six) {
    const Rotation6D r = matrix_to_rot6d(rot6d_to_matrix(Rotation6D::from_span(six)));
    for (int c = 0; c < 3; ++c) {
      six[c] = r.a1[c];
      six[3 + c] = r.a2[c];
    }
  };
  for (Eigen::Index t = 0; t < out.global_rotation.rows(); ++t) {
    fix(out.global_rotation.row(t).data());
    for (Eigen::Index c = 0; c < out.joint_rotations.cols(); c += 6) fix(out.joint_rotations.row(t).data() + c);
  }
  return out;
}

void validate_motion(const MotionSequence& m, const SkeletonGraph& g, FrameRange range) {
  if (m.joint_count() != g.joint_count() || m.joint_rotations.cols() % 6 != 0) {
    fail(ErrorCode::SkeletonMismatch, "motion joint count " + std::to_string(m.joint_count()) +
                                          " does not match skeleton '" + g.name() + "'");
  }
  const std::size_t T = m.frames();
  if (static_cast<std::size_t>(m.global_translation.rows()) != T ||
      static_cast<std::size_t>(m.joint_rotations.rows()) != T || m.mask.size() != T) {
    fail(ErrorCode::ValidationError, "motion component lengths disagree");
  }
  const std::size_t real = m.real_frames();
  if (real < range.min_frames || real > range.max_frames) {
    fail(ErrorCode::ValidationError, std::to_string(real) + " frames outside [" +
                                         std::to_string(range.min_frames) + ", " +
                                         std::to_string(range.max_frames) + "]");
  }
  for (std::size_t t = 0; t < T; ++t) {
    // padding is a suffix
    if (t > 0 && m.mask[t] && !m.mask[t - 1]) fail(ErrorCode::ValidationError, "mask is not a real-frame prefix");
  }
  if (!m.global_rotation.allFinite() || !m.global_translation.allFinite() || !m.joint_rotations.allFinite()) {
    fail(ErrorCode::ValidationError, "non-finite motion values");
  }
  for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(T); ++t) {
    rot6d_to_matrix(Rotation6D::from_span(m.global_rotation.row(t).data()));
    for (Eigen::Index c = 0; c < m.joint_rotations.cols(); c += 6) {
      rot6d_to_matrix(Rotation6D::from_span(m.joint_rotations.row(t).data() + c));
    }
  }
}

}  // namespace omgpt
