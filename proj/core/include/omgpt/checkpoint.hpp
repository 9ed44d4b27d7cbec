#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "omgpt/tensor.hpp"

namespace omgpt {

/// Named float32 array as stored in a checkpoint file.
struct NamedArray {
  std::string name;
  tc::Shape shape;
  std::vector<float> values;

  bool operator==(const NamedArray&) const = default;
};

inline constexpr char kCheckpointMagic[4] = {'O', 'M', 'G', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Little-endian layout: magic "OMGT", u32 version, u32 tensor count, then per
/// tensor: u32 name length, UTF-8 name, u32 rank, u64 dims, f32 payload.
void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays);

/// Throws CheckpointMissing, VersionMismatch (bad magic or version) or
/// ParseError (truncated payload).
std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path);

const NamedArray* find_array(const std::vector<NamedArray>& arrays, const std::string& name);

}  // namespace omgpt
