#include "omgpt/datagen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <Eigen/Geometry>
#include <json.hpp>

#include "omgpt/error.hpp"
#include "omgpt/random.hpp"
#include "omgpt/textembed.hpp"

namespace omgpt {

using nlohmann::json;

const std::vector<std::string>& motion_families() {
  static const std::vector<std::string> families = {"walk", "run", "jump", "turn", "wave", "sit"};
  return families;
}

const std::vector<std::string>& default_animals() {
  static const std::vector<std::string> animals = {"bear", "dog", "horse", "cat"};
  return animals;
}

void DatasetSpec::validate() const {
  if (families.empty()) fail(ErrorCode::ConfigError, "dataset spec lists no families");
  for (const auto& f : families) {
    if (std::find(motion_families().begin(), motion_families().end(), f) == motion_families().end()) {
      fail(ErrorCode::UnknownFamily, "unknown motion family '" + f + "'");
    }
  }
  if (samples_per_family <= 0) fail(ErrorCode::ConfigError, "samples_per_family must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) fail(ErrorCode::ConfigError, "train_fraction must lie in (0, 1)");
  const FrameRange limit = kind == SubjectKind::Human ? kHumanFrames : kAnimalFrames;
  if (frames.min_frames < limit.min_frames || frames.max_frames > limit.max_frames ||
      frames.min_frames > frames.max_frames) {
    fail(ErrorCode::ConfigError, "frame range [" + std::to_string(frames.min_frames) + ", " +
                                     std::to_string(frames.max_frames) + "] outside [" +
                                     std::to_string(limit.min_frames) + ", " + std::to_string(limit.max_frames) + "]");
  }
  if (!(fps > 0.0)) fail(ErrorCode::ConfigError, "fps must be positive");
}

std::vector<std::string> family_phrases(const std::string& family, int variant) {
  if (family == "walk") return {"walks forward", "is walking forward at a steady pace", "takes several steps forward"};
  if (family == "run") return {"runs forward quickly", "is running ahead at speed", "dashes forward"};
  if (family == "jump") return {"jumps up in place", "leaps into the air", "performs a vertical jump"};
  if (family == "turn") {
    const std::string side = variant == 0 ? "left" : "right";
    return {"turns to the " + side, "rotates to the " + side + " on the spot", "pivots toward the " + side};
  }
  if (family == "wave") return {"waves a front limb", "lifts a limb and waves it", "raises a limb and shakes it"};
  if (family == "sit") return {"sits down", "settles into a seated pose", "crouches down to sit"};
  fail(ErrorCode::UnknownFamily, "unknown motion family '" + family + "'");
}

std::vector<const DatasetEntry*> Dataset::split(bool train) const {
  std::vector<const DatasetEntry*> out;
  for (const auto& e : entries) {
    if (e.train == train) out.push_back(&e);
  }
  return out;
}

bool Dataset::operator==(const Dataset& other) const {
  if (skeleton != other.skeleton || kind != other.kind || entries.size() != other.entries.size()) return false;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& a = entries[i];
    const auto& b = other.entries[i];
    if (!(a.motion == b.motion) || a.captions != b.captions || a.family != b.family || a.action != b.action || a.subject != b.subject ||
        a.train != b.train) {
      return false;
    }
  }
  return true;
}

namespace {

using Eigen::Matrix3d;

Matrix3d rot_x(double a) { return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitX()).toRotationMatrix(); }
Matrix3d rot_y(double a) { return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitY()).toRotationMatrix(); }
Matrix3d rot_z(double a) { return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ()).toRotationMatrix(); }

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

struct Limb {
  int upper = -1;
  int lower = -1;
  int distal = -1;
};

// Joints driven by the generators, derived from the end-effector order
// (head, left-front, right-front, left-back, right-back; three effectors mean
// head plus one leg pair).
struct Rig {
  Limb head;
  Limb front_left, front_right, back_left, back_right;
  std::vector<int> spine;
  bool biped = true;
  bool has_front = false;
};

Rig build_rig(const SkeletonGraph& g, SubjectKind kind) {
  const auto n = g.joint_count();
  std::vector<int> reach(n, 0);  // effectors strictly below each joint
  for (int e : g.end_effector_ids()) {
    for (int p = g.parent(e); p != kNoParent; p = g.parent(p)) ++reach[static_cast<std::size_t>(p)];
  }
  auto chain = [&](int e) {
    std::vector<int> c;
    for (int p = g.parent(e); p != kNoParent && reach[static_cast<std::size_t>(p)] == 1; p = g.parent(p)) c.push_back(p);
    std::reverse(c.begin(), c.end());
    return c;
  };
  auto at = [](const std::vector<int>& c, std::size_t i) { return i < c.size() ? c[i] : -1; };
  auto leg = [&](int e) {
    const auto c = chain(e);
    return Limb{at(c, 0), at(c, 1), at(c, 2)};
  };
  auto arm = [&](int e) {
    const auto c = chain(e);
    if (c.size() < 2) return Limb{at(c, 0), -1, -1};
    return Limb{c[c.size() - 2], c[c.size() - 1], -1};
  };

  Rig rig;
  rig.biped = kind == SubjectKind::Human;
  const auto ee = g.end_effector_ids();
  if (!ee.empty()) rig.head = leg(ee[0]);
  if (ee.size() >= 5) {
    rig.has_front = true;
    rig.front_left = rig.biped ? arm(ee[1]) : leg(ee[1]);
    rig.front_right = rig.biped ? arm(ee[2]) : leg(ee[2]);
    rig.back_left = leg(ee[3]);
    rig.back_right = leg(ee[4]);
  } else if (ee.size() >= 3) {
    rig.back_left = leg(ee[1]);
    rig.back_right = leg(ee[2]);
  }
  for (std::size_t j = 0; j < n; ++j) {
    const int joint = static_cast<int>(j);
    if (joint != g.root() && reach[j] >= 2 && g.degree(joint) == 2) rig.spine.push_back(joint);
  }
  return rig;
}

struct Species {
  double tempo = 1.0;
  double amplitude = 1.0;
  double speed = 1.0;
};

Species species_of(const std::string& name) {
  if (name == "bear") return {0.8, 0.9, 0.7};
  if (name == "dog") return {1.15, 1.0, 1.0};
  if (name == "horse") return {1.0, 1.15, 1.4};
  if (name == "cat") return {1.3, 0.85, 0.8};
  return {};
}

class Pose {
 public:
  explicit Pose(std::size_t joints) : local_(joints, Matrix3d::Identity()) {}
  void set(int joint, const Matrix3d& r) {
    if (joint >= 0) local_[static_cast<std::size_t>(joint)] = r * local_[static_cast<std::size_t>(joint)];
  }
  const Matrix3d& operator[](std::size_t j) const { return local_[j]; }

 private:
  std::vector<Matrix3d> local_;
};

void put6d(const Matrix3d& m, double* out) {
  for (int c = 0; c < 2; ++c) {
    for (int r = 0; r < 3; ++r) out[c * 3 + r] = static_cast<double>(static_cast<float>(m(r, c)));
  }
}

struct SampleParams {
  double freq, amp, speed, phase, yaw, bob, lean, height, extent;
  int variant;
  std::vector<double> spine_jitter;
};

MotionSequence synthesize(const std::string& family, const SkeletonGraph& g, const Rig& rig,
                          const SampleParams& p, std::size_t frames, double fps) {
  constexpr double pi = std::numbers::pi;
  MotionSequence m = MotionSequence::identity(g.name(), frames, g.joint_count());
  const double duration = static_cast<double>(frames) / fps;
  const double arm_down = 1.2;
  const double nspine = std::max<double>(1.0, static_cast<double>(rig.spine.size()));

  for (std::size_t t = 0; t < frames; ++t) {
    const double time = static_cast<double>(t) / fps;
    Pose pose(g.joint_count());
    Matrix3d root = rot_y(p.yaw);
    Eigen::Vector3d pos(0.0, 0.0, 0.0);
    const Eigen::Vector3d forward = rot_y(p.yaw) * Eigen::Vector3d::UnitZ();

    // rest pose: human arms hang down
    if (rig.biped && rig.has_front) {
      pose.set(rig.front_left.upper, rot_z(-arm_down));
      pose.set(rig.front_right.upper, rot_z(arm_down));
    }
    for (std::size_t i = 0; i < rig.spine.size(); ++i) pose.set(rig.spine[i], rot_x(p.spine_jitter[i]));

    auto leg = [&](const Limb& l, double swing, double knee) {
      pose.set(l.upper, rot_x(-swing));
      pose.set(l.lower, rot_x(knee));
    };
    auto arm = [&](const Limb& l, double swing) { pose.set(l.upper, rot_x(-swing)); };

    if (family == "walk" || family == "run") {
      const bool run = family == "run";
      const double phi = 2.0 * pi * p.freq * time + p.phase;
      const double a = p.amp;
      const double knee = run ? 1.2 * a : 0.6 * a;
      auto knee_of = [&](double ph) { return knee * std::max(0.0, std::sin(ph + pi / 2.0)); };
      leg(rig.back_left, a * std::sin(phi), knee_of(phi));
      leg(rig.back_right, a * std::sin(phi + pi), knee_of(phi + pi));
      if (rig.has_front) {
        if (rig.biped) {
          arm(rig.front_left, 0.6 * a * std::sin(phi + pi));
          arm(rig.front_right, 0.6 * a * std::sin(phi));
          if (run) {
            pose.set(rig.front_left.lower, rot_x(-1.2));
            pose.set(rig.front_right.lower, rot_x(-1.2));
          }
        } else {
          leg(rig.front_left, a * std::sin(phi + pi), knee_of(phi + pi));
          leg(rig.front_right, a * std::sin(phi), knee_of(phi));
        }
      }
      for (int s : rig.spine) pose.set(s, rot_x(p.lean / nspine));
      pos = forward * (p.speed * time);
      pos.y() += p.bob * std::abs(std::sin(phi));
    } else if (family == "jump") {
      const double period = duration / static_cast<double>(p.variant + 1);
      const double u = std::fmod(time, period) / period;
      double crouch = 0.0;
      double air = 0.0;
      if (u < 0.3) {
        crouch = std::sin(pi * u / 0.3);
      } else if (u < 0.7) {
        air = (u - 0.3) / 0.4;
      } else {
        crouch = 0.7 * std::sin(pi * (u - 0.7) / 0.3);
      }
      const double lift = air > 0.0 ? 4.0 * air * (1.0 - air) : 0.0;
      leg(rig.back_left, 0.8 * crouch, 1.4 * crouch);
      leg(rig.back_right, 0.8 * crouch, 1.4 * crouch);
      pose.set(rig.back_left.distal, rot_x(-0.6 * crouch));
      pose.set(rig.back_right.distal, rot_x(-0.6 * crouch));
      if (rig.has_front) {
        if (rig.biped) {
          arm(rig.front_left, 1.5 * lift - 0.4 * crouch);
          arm(rig.front_right, 1.5 * lift - 0.4 * crouch);
        } else {
          leg(rig.front_left, -0.3 * crouch + 0.4 * lift, 0.9 * crouch + 0.6 * lift);
          leg(rig.front_right, -0.3 * crouch + 0.4 * lift, 0.9 * crouch + 0.6 * lift);
        }
      }
      for (int s : rig.spine) pose.set(s, rot_x(0.4 * crouch / nspine));
      const double jumps_done = std::floor(time / period) + (u >= 0.3 ? std::min(1.0, (u - 0.3) / 0.4) : 0.0);
      pos = forward * (p.speed * 0.2 * jumps_done);
      pos.y() = p.height * lift - 0.15 * p.extent * crouch;
    } else if (family == "turn") {
      const double dir = p.variant == 0 ? 1.0 : -1.0;
      root = rot_y(p.yaw + dir * p.extent * smoothstep(time / duration));
      const double phi = 2.0 * pi * p.freq * time + p.phase;
      leg(rig.back_left, 0.25 * p.amp * std::sin(phi), 0.2 * p.amp * std::max(0.0, std::sin(phi)));
      leg(rig.back_right, 0.25 * p.amp * std::sin(phi + pi), 0.2 * p.amp * std::max(0.0, std::sin(phi + pi)));
      if (rig.has_front && !rig.biped) {
        leg(rig.front_left, 0.25 * p.amp * std::sin(phi + pi), 0.2 * p.amp * std::max(0.0, std::sin(phi + pi)));
        leg(rig.front_right, 0.25 * p.amp * std::sin(phi), 0.2 * p.amp * std::max(0.0, std::sin(phi)));
      }
      for (int s : rig.spine) pose.set(s, rot_y(0.3 * dir * std::sin(pi * time / duration) / nspine));
    } else if (family == "wave") {
      const double phi = 2.0 * pi * p.freq * time + p.phase;
      const double raise = smoothstep(time / std::min(1.0, 0.3 * duration));
      if (rig.has_front && rig.biped) {
        // right arm rotated up past horizontal, forearm swinging sideways
        pose.set(rig.front_right.upper, rot_z(-(arm_down + 1.3) * raise));
        pose.set(rig.front_right.lower, rot_z(raise * p.amp * std::sin(phi)));
      } else if (rig.has_front) {
        leg(rig.front_left, raise * (1.0 + 0.3 * p.amp * std::sin(phi)), raise * (0.8 + 0.5 * p.amp * std::sin(phi)));
      } else {
        leg(rig.back_left, raise * (0.8 + 0.3 * p.amp * std::sin(phi)), 0.0);
      }
      pose.set(rig.head.upper, rot_y(0.2 * raise * std::sin(0.5 * phi)));
    } else if (family == "sit") {
      const double s = smoothstep(time / (p.extent * duration));
      if (rig.biped) {
        leg(rig.back_left, 1.5 * s, 1.6 * s);
        leg(rig.back_right, 1.5 * s, 1.6 * s);
        for (int sj : rig.spine) pose.set(sj, rot_x(0.3 * s / nspine));
        if (rig.has_front) {
          arm(rig.front_left, 0.5 * s);
          arm(rig.front_right, 0.5 * s);
        }
        pos.y() = -0.45 * p.amp * s;
      } else {
        root = rot_y(p.yaw) * rot_x(-0.5 * s);
        leg(rig.back_left, 1.0 * s, 1.8 * s);
        leg(rig.back_right, 1.0 * s, 1.8 * s);
        if (rig.has_front) {
          leg(rig.front_left, -0.5 * s, 0.0);
          leg(rig.front_right, -0.5 * s, 0.0);
        }
        pos.y() = -0.12 * p.amp * s;
      }
      pose.set(rig.head.upper, rot_x(0.2 * s));
    }

    put6d(root, m.global_rotation.row(static_cast<Eigen::Index>(t)).data());
    for (int c = 0; c < 3; ++c) m.global_translation(static_cast<Eigen::Index>(t), c) = static_cast<float>(pos[c]);
    for (std::size_t j = 0; j < g.joint_count(); ++j) {
      const int row = g.offset_row(static_cast<int>(j));
      if (row < 0) continue;
      put6d(pose[j], m.joint_rotations.row(static_cast<Eigen::Index>(t)).data() + row * 6);
    }
  }
  return m;
}

SampleParams draw_params(const std::string& family, const Species& sp, std::size_t spine, std::mt19937_64& rng) {
  SampleParams p{};
  p.phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  p.yaw = uniform(rng, -0.3, 0.3);
  p.variant = 0;
  p.bob = 0.0;
  p.lean = 0.0;
  p.height = 0.0;
  p.extent = 1.0;
  if (family == "walk") {
    p.freq = uniform(rng, 0.8, 1.1) * sp.tempo;
    p.amp = uniform(rng, 0.35, 0.5) * sp.amplitude;
    p.speed = uniform(rng, 0.9, 1.3) * sp.speed;
    p.bob = 0.02;
    p.lean = 0.05;
  } else if (family == "run") {
    p.freq = uniform(rng, 1.5, 2.0) * sp.tempo;
    p.amp = uniform(rng, 0.65, 0.85) * sp.amplitude;
    p.speed = uniform(rng, 2.6, 3.4) * sp.speed;
    p.bob = 0.06;
    p.lean = 0.25;
  } else if (family == "jump") {
    p.freq = 0.0;
    p.amp = sp.amplitude;
    p.speed = uniform(rng, 0.0, 1.0);
    p.height = uniform(rng, 0.3, 0.6) * sp.amplitude;
    p.variant = static_cast<int>(uniform_index(rng, 2));
    p.extent = sp.amplitude;
  } else if (family == "turn") {
    p.freq = uniform(rng, 0.9, 1.2) * sp.tempo;
    p.amp = sp.amplitude;
    p.speed = 0.0;
    p.variant = static_cast<int>(uniform_index(rng, 2));
    p.extent = uniform(rng, 0.5, 1.0) * std::numbers::pi;
  } else if (family == "wave") {
    p.freq = uniform(rng, 1.5, 2.5) * sp.tempo;
    p.amp = uniform(rng, 0.4, 0.6) * sp.amplitude;
    p.speed = 0.0;
  } else if (family == "sit") {
    p.freq = 0.0;
    p.amp = uniform(rng, 0.9, 1.1) * sp.amplitude;
    p.speed = 0.0;
    p.extent = uniform(rng, 0.4, 0.7);
  } else {
    fail(ErrorCode::UnknownFamily, "unknown motion family '" + family + "'");
  }
  p.spine_jitter.resize(spine);
  for (auto& j : p.spine_jitter) j = uniform(rng, -0.03, 0.03);
  return p;
}

}  // namespace

Dataset generate(const DatasetSpec& spec, const SkeletonGraph& graph) {
  spec.validate();
  const Rig rig = build_rig(graph, spec.kind);
  const bool human = spec.kind == SubjectKind::Human;
  const std::vector<std::string>& subjects =
      !spec.subjects.empty() ? spec.subjects : (human ? default_subject_phrases() : default_animals());

  Dataset ds;
  ds.skeleton = graph.name();
  ds.kind = spec.kind;
  const auto train_count = static_cast<int>(std::floor(spec.samples_per_family * spec.train_fraction));
  for (std::size_t f = 0; f < spec.families.size(); ++f) {
    const std::string& family = spec.families[f];
    const auto family_id = static_cast<std::uint64_t>(
        std::find(motion_families().begin(), motion_families().end(), family) - motion_families().begin());
    for (int i = 0; i < spec.samples_per_family; ++i) {
      std::mt19937_64 rng(derive_seed(spec.seed, {family_id, static_cast<std::uint64_t>(i)}));
      const std::string subject = subjects[uniform_index(rng, subjects.size())];
      const Species sp = human ? Species{} : species_of(subject);
      const auto span = spec.frames.max_frames - spec.frames.min_frames + 1;
      const std::size_t frames = spec.frames.min_frames + static_cast<std::size_t>(uniform_index(rng, span));
      const SampleParams params = draw_params(family, sp, rig.spine.size(), rng);

      DatasetEntry e;
      e.family = family;
      e.action = family == "turn" ? (params.variant == 0 ? "turn_left" : "turn_right") : family;
      e.subject = subject;
      e.train = i < train_count;
      for (const auto& phrase : family_phrases(family, params.variant)) {
        const std::string who = human ? subjects[uniform_index(rng, subjects.size())] : "a " + subject;
        e.captions.push_back(who + " " + phrase);
      }
      e.motion = synthesize(family, graph, rig, params, frames, spec.fps);
      e.motion.caption = e.captions.front();
      ds.entries.push_back(std::move(e));
    }
  }
  return ds;
}

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f32(std::ofstream& out, double v) { put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

std::uint32_t get_u32(std::ifstream& in, const std::filesystem::path& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) fail(ErrorCode::ParseError, path.string() + ": truncated motion file");
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

double get_f32(std::ifstream& in, const std::filesystem::path& path) {
  return static_cast<double>(std::bit_cast<float>(get_u32(in, path)));
}

std::string kind_name(SubjectKind k) { return k == SubjectKind::Human ? "human" : "animal"; }

}  // namespace

void write_motion(const MotionSequence& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::ParseError, "cannot write " + path.string());
  put_u32(out, static_cast<std::uint32_t>(m.frames()));
  put_u32(out, static_cast<std::uint32_t>(m.joint_count()));
  for (Eigen::Index t = 0; t < m.global_rotation.rows(); ++t) {
    for (Eigen::Index c = 0; c < 6; ++c) put_f32(out, m.global_rotation(t, c));
  }
  for (Eigen::Index t = 0; t < m.global_translation.rows(); ++t) {
    for (Eigen::Index c = 0; c < 3; ++c) put_f32(out, m.global_translation(t, c));
  }
  for (Eigen::Index t = 0; t < m.joint_rotations.rows(); ++t) {
    for (Eigen::Index c = 0; c < m.joint_rotations.cols(); ++c) put_f32(out, m.joint_rotations(t, c));
  }
  if (!out) fail(ErrorCode::ParseError, "failed writing " + path.string());
}

MotionSequence read_motion(const std::filesystem::path& path, const std::string& skeleton) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::ParseError, "cannot open " + path.string());
  const std::uint32_t frames = get_u32(in, path);
  const std::uint32_t joints = get_u32(in, path);
  if (frames == 0 || joints == 0 || frames > 100000 || joints > 10000) {
    fail(ErrorCode::ParseError, path.string() + ": implausible header");
  }
  MotionSequence m = MotionSequence::identity(skeleton, frames, joints);
  for (Eigen::Index t = 0; t < m.global_rotation.rows(); ++t) {
    for (Eigen::Index c = 0; c < 6; ++c) m.global_rotation(t, c) = get_f32(in, path);
  }
  for (Eigen::Index t = 0; t < m.global_translation.rows(); ++t) {
    for (Eigen::Index c = 0; c < 3; ++c) m.global_translation(t, c) = get_f32(in, path);
  }
  for (Eigen::Index t = 0; t < m.joint_rotations.rows(); ++t) {
    for (Eigen::Index c = 0; c < m.joint_rotations.cols(); ++c) m.joint_rotations(t, c) = get_f32(in, path);
  }
  if (in.peek() != std::char_traits<char>::eof()) fail(ErrorCode::ParseError, path.string() + ": trailing bytes");
  return m;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json index;
  index["format"] = 1;
  index["skeleton"] = ds.skeleton;
  index["kind"] = kind_name(ds.kind);
  json motions = json::array();
  for (std::size_t i = 0; i < ds.entries.size(); ++i) {
    const auto& e = ds.entries[i];
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.bin", i);
    write_motion(e.motion, dir / name);
    motions.push_back({{"file", name},
                       {"frames", e.motion.frames()},
                       {"family", e.family},
                       {"action", e.action},
                       {"subject", e.subject},
                       {"split", e.train ? "train" : "test"},
                       {"captions", e.captions}});
  }
  index["motions"] = motions;
  std::ofstream out(dir / "index.json");
  if (!out) fail(ErrorCode::ParseError, "cannot write " + (dir / "index.json").string());
  out << index.dump(1) << '\n';
}

Dataset load_dataset(const std::filesystem::path& dir, const SkeletonGraph& graph, FrameRange frames) {
  const auto index_path = dir / "index.json";
  std::ifstream in(index_path);
  if (!in) fail(ErrorCode::ParseError, "missing dataset index " + index_path.string());
  Dataset ds;
  try {
    const json index = json::parse(in);
    if (index.at("format").get<int>() != 1) fail(ErrorCode::ParseError, index_path.string() + ": unknown format");
    ds.skeleton = index.at("skeleton").get<std::string>();
    const auto kind = index.at("kind").get<std::string>();
    if (kind != "human" && kind != "animal") fail(ErrorCode::ParseError, "unknown dataset kind '" + kind + "'");
    ds.kind = kind == "human" ? SubjectKind::Human : SubjectKind::Animal;
    for (const auto& item : index.at("motions")) {
      DatasetEntry e;
      e.family = item.at("family").get<std::string>();
      e.action = item.at("action").get<std::string>();
      e.subject = item.at("subject").get<std::string>();
      const auto split = item.at("split").get<std::string>();
      if (split != "train" && split != "test") fail(ErrorCode::ParseError, "unknown split '" + split + "'");
      e.train = split == "train";
      e.captions = item.at("captions").get<std::vector<std::string>>();
      if (e.captions.empty()) fail(ErrorCode::ParseError, "motion without captions in " + index_path.string());
      e.motion = read_motion(dir / item.at("file").get<std::string>(), ds.skeleton);
      if (e.motion.frames() != item.at("frames").get<std::size_t>()) {
        fail(ErrorCode::ParseError, "frame count of " + item.at("file").get<std::string>() + " disagrees with index");
      }
      e.motion.caption = e.captions.front();
      ds.entries.push_back(std::move(e));
    }
  } catch (const json::exception& ex) {
    fail(ErrorCode::ParseError, index_path.string() + ": " + ex.what());
  }
  if (ds.skeleton != graph.name()) {
    fail(ErrorCode::SkeletonMismatch, "dataset uses skeleton '" + ds.skeleton + "', expected '" + graph.name() + "'");
  }
  for (const auto& e : ds.entries) validate_motion(e.motion, graph, frames);
  return ds;
}

}  // namespace omgpt
