#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace omgpt {

inline constexpr std::size_t kDefaultClipDim = 512;
inline constexpr std::uint64_t kDefaultEmbedSeed = 20240521;

/// Fixed-width semantic vector standing in for a CLIP text feature.
struct TextEmbedding {
  std::vector<double> vector;
  std::string source_text;
};

/// Text-to-vector map used for captions. Implementations are read-only after
/// construction and safe to share.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual TextEmbedding embed(const std::string& text) const = 0;
  virtual std::size_t dimension() const = 0;
};

/// Lowercases, drops punctuation and splits on whitespace.
std::vector<std::string> tokenize(const std::string& text);

/// Bag-of-tokens hash embedding: each token maps to a seeded pseudo-random unit
/// vector and the caption embedding is the normalised sum. Bit-identical across
/// platforms for a given (text, seed, dim). Throws EmptyText.
TextEmbedding embed(const std::string& text, std::uint64_t seed = kDefaultEmbedSeed,
                    std::size_t dim = kDefaultClipDim);

class HashEmbedder final : public EmbeddingProvider {
 public:
  explicit HashEmbedder(std::uint64_t seed = kDefaultEmbedSeed, std::size_t dim = kDefaultClipDim)
      : seed_(seed), dim_(dim) {}
  TextEmbedding embed(const std::string& text) const override { return omgpt::embed(text, seed_, dim_); }
  std::size_t dimension() const override { return dim_; }

 private:
  std::uint64_t seed_;
  std::size_t dim_;
};

/// Exact-match lookup of externally computed vectors (e.g. real CLIP features).
/// File format: one `caption<TAB>v1 v2 ... vD` per line.
class EmbeddingTable final : public EmbeddingProvider {
 public:
  /// Throws ParseError or DimensionMismatch.
  static EmbeddingTable load(const std::filesystem::path& path, std::size_t dim = kDefaultClipDim);

  /// Throws UnknownCaption.
  TextEmbedding embed(const std::string& text) const override;
  std::size_t dimension() const override { return dim_; }
  std::size_t size() const { return table_.size(); }

 private:
  std::size_t dim_ = kDefaultClipDim;
  std::unordered_map<std::string, std::vector<double>> table_;
};

const std::vector<std::string>& default_subject_phrases();

/// Replaces a leading subject phrase with "a {animal}". Matching is on whole
/// words, longest phrase first. Throws SubjectNotFound.
std::string subject_swap(const std::string& text, const std::string& animal,
                         std::span<const std::string> subjects = default_subject_phrases());

double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace omgpt
