#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "omgpt/motion.hpp"
#include "omgpt/skeleton.hpp"

namespace omgpt {

enum class SubjectKind { Human, Animal };

const std::vector<std::string>& motion_families();
const std::vector<std::string>& default_animals();

struct DatasetSpec {
  std::uint64_t seed = 7;
  SubjectKind kind = SubjectKind::Human;
  std::vector<std::string> families = motion_families();
  int samples_per_family = 134;
  FrameRange frames{64, 196};
  double train_fraction = 0.75;
  double fps = 20.0;
  /// Subject phrases (human) or species names (animal); empty selects the defaults.
  std::vector<std::string> subjects;

  /// Throws ConfigError or UnknownFamily.
  void validate() const;
};

struct DatasetEntry {
  MotionSequence motion;
  std::vector<std::string> captions;  // three paraphrases
  std::string family;
  std::string action;  // family refined by caption-visible variant, e.g. turn_left
  std::string subject;
  bool train = true;
};

struct Dataset {
  std::string skeleton;
  SubjectKind kind = SubjectKind::Human;
  std::vector<DatasetEntry> entries;

  std::vector<const DatasetEntry*> split(bool train) const;
  bool operator==(const Dataset&) const;
};

/// Procedural paired text/motion set. Deterministic per spec; every sample owns
/// a generator derived from (seed, family, index). Throws UnknownFamily.
Dataset generate(const DatasetSpec& spec, const SkeletonGraph& graph);

/// Verb phrases for a family; `variant` selects e.g. the turn direction.
std::vector<std::string> family_phrases(const std::string& family, int variant);

/// Writes `index.json` and one little-endian float32 file per motion.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
/// Throws ParseError for missing or malformed files and ValidationError for
/// motions outside `frames` or not matching `graph`.
Dataset load_dataset(const std::filesystem::path& dir, const SkeletonGraph& graph, FrameRange frames);

void write_motion(const MotionSequence& motion, const std::filesystem::path& path);
MotionSequence read_motion(const std::filesystem::path& path, const std::string& skeleton);

}  // namespace omgpt
