#include "omgpt/textembed.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "omgpt/error.hpp"

namespace omgpt {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

void normalize(std::vector<double>& v) {
  double ss = 0.0;
  for (double x : v) ss += x * x;
  const double n = std::sqrt(ss);
  if (n == 0.0) return;
  for (double& x : v) x /= n;
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (unsigned char c : text) {
    if (std::ispunct(c)) continue;
    cleaned.push_back(static_cast<char>(std::isspace(c) ? ' ' : std::tolower(c)));
  }
  std::istringstream in(cleaned);
  std::vector<std::string> tokens;
  for (std::string tok; in >> tok;) tokens.push_back(tok);
  return tokens;
}

TextEmbedding embed(const std::string& text, std::uint64_t seed, std::size_t dim) {
  const auto tokens = tokenize(text);
  if (tokens.empty()) fail(ErrorCode::EmptyText, "cannot embed '" + text + "'");
  std::vector<double> acc(dim, 0.0);
  std::vector<double> token_vec(dim);
  for (const auto& tok : tokens) {
    std::uint64_t state = seed ^ fnv1a(tok);
    for (auto& x : token_vec) {
      const double u = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
      x = 2.0 * u - 1.0;
    }
    normalize(token_vec);
    for (std::size_t i = 0; i < dim; ++i) acc[i] += token_vec[i];
  }
  normalize(acc);
  return {std::move(acc), text};
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path, std::size_t dim) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ParseError, "cannot open " + path.string());
  EmbeddingTable table;
  table.dim_ = dim;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      fail(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno) + ": missing tab separator");
    }
    std::vector<double> v;
    std::istringstream values(line.substr(tab + 1));
    std::string tok;
    while (values >> tok) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        fail(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno) + ": bad number '" + tok + "'");
      }
    }
    if (v.size() != dim) {
      fail(ErrorCode::DimensionMismatch, path.string() + ":" + std::to_string(lineno) + ": " +
                                             std::to_string(v.size()) + " values, expected " + std::to_string(dim));
    }
    double ss = 0.0;
    for (double x : v) ss += x * x;
    if (!(ss > 0.0) || !std::isfinite(ss)) {
      fail(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno) + ": zero or non-finite vector");
    }
    table.table_[line.substr(0, tab)] = std::move(v);
  }
  return table;
}

TextEmbedding EmbeddingTable::embed(const std::string& text) const {
  const auto it = table_.find(text);
  if (it == table_.end()) fail(ErrorCode::UnknownCaption, "'" + text + "' not in embedding table");
  return {it->second, text};
}

const std::vector<std::string>& default_subject_phrases() {
  static const std::vector<std::string> phrases{"a person", "the person", "a man", "a woman", "someone"};
  return phrases;
}

std::string subject_swap(const std::string& text, const std::string& animal, std::span<const std::string> subjects) {
  std::vector<std::string> ordered(subjects.begin(), subjects.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
  const std::string low = lower(text);
  for (const auto& phrase : ordered) {
    const std::string p = lower(phrase);
    if (p.empty() || low.compare(0, p.size(), p) != 0) continue;
    if (low.size() > p.size() && std::isalnum(static_cast<unsigned char>(low[p.size()]))) continue;
    return "a " + animal + text.substr(p.size());
  }
  fail(ErrorCode::SubjectNotFound, "no subject phrase at the start of '" + text + "'");
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

}  // namespace omgpt
