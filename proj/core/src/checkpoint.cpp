#include "omgpt/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "omgpt/error.hpp"

namespace omgpt {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

  std::uint64_t get(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) fail(ErrorCode::ParseError, source_ + ": truncated checkpoint");
  }

  const std::string& bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays) {
  std::string out(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    if (static_cast<std::int64_t>(a.values.size()) != tc::numel(a.shape)) {
      fail(ErrorCode::ShapeMismatch, "checkpoint array '" + a.name + "' does not match its shape");
    }
    put_u32(out, static_cast<std::uint32_t>(a.name.size()));
    out += a.name;
    put_u32(out, static_cast<std::uint32_t>(a.shape.size()));
    for (auto d : a.shape) put_u64(out, static_cast<std::uint64_t>(d));
    for (float f : a.values) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  // Write to a sibling file then rename, so readers never see a half-written checkpoint.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) fail(ErrorCode::ParseError, "cannot write " + tmp.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
  }
  std::filesystem::rename(tmp, path);
}

std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::CheckpointMissing, "cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    fail(ErrorCode::VersionMismatch, path.string() + ": not an OMGT checkpoint");
  }
  Reader r(bytes, path.string());
  r.take(4);
  const auto version = static_cast<std::uint32_t>(r.get(4));
  if (version != kCheckpointVersion) {
    fail(ErrorCode::VersionMismatch, path.string() + ": version " + std::to_string(version) + ", expected " +
                                         std::to_string(kCheckpointVersion));
  }
  const auto count = r.get(4);
  std::vector<NamedArray> arrays;
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = r.take(static_cast<std::size_t>(r.get(4)));
    const auto rank = r.get(4);
    if (rank > 16) fail(ErrorCode::ParseError, path.string() + ": implausible rank for '" + a.name + "'");
    for (std::uint64_t d = 0; d < rank; ++d) a.shape.push_back(static_cast<std::int64_t>(r.get(8)));
    const auto n = static_cast<std::size_t>(tc::numel(a.shape));
    if (n > bytes.size()) fail(ErrorCode::ParseError, path.string() + ": truncated checkpoint");
    a.values.resize(n);
    for (auto& v : a.values) v = std::bit_cast<float>(static_cast<std::uint32_t>(r.get(4)));
    arrays.push_back(std::move(a));
  }
  if (!r.done()) fail(ErrorCode::ParseError, path.string() + ": trailing bytes after last tensor");
  return arrays;
}

const NamedArray* find_array(const std::vector<NamedArray>& arrays, const std::string& name) {
  const auto it = std::find_if(arrays.begin(), arrays.end(), [&](const NamedArray& a) { return a.name == name; });
  return it == arrays.end() ? nullptr : &*it;
}

}  // namespace omgpt
