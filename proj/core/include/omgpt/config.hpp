#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>

#include "omgpt/crossdomain.hpp"
#include "omgpt/datagen.hpp"
#include "omgpt/optim.hpp"

namespace omgpt {

/// Flat `key = value` text with `[section]` headers and `#` comments.
class ConfigFile {
 public:
  /// Throws ConfigError with the offending line number.
  static ConfigFile parse(std::string_view text, const std::string& origin = "<config>");
  /// Throws ConfigError when the file cannot be read.
  static ConfigFile load(const std::filesystem::path& path);

  std::optional<std::string> get(const std::string& section, const std::string& key) const;
  /// Keys never queried through get(); used to reject typos.
  std::vector<std::string> unused() const;
  const std::string& origin() const { return origin_; }

 private:
  std::string origin_;
  std::map<std::pair<std::string, std::string>, std::string> values_;
  mutable std::set<std::pair<std::string, std::string>> used_;
};

struct TrainConfig {
  int steps = 3000;
  int batch_size = 16;
  tc::AdamConfig adam;
  double ema_decay = 0.99;
  int checkpoint_interval = 500;
  std::uint64_t seed = 1;
  double clip_norm = 1.0;  // 0 disables clipping
  bool ema_for_eval = true;

  bool operator==(const TrainConfig& o) const {
    return steps == o.steps && batch_size == o.batch_size && adam.lr == o.adam.lr && adam.beta1 == o.adam.beta1 &&
           adam.beta2 == o.adam.beta2 && adam.eps == o.adam.eps && ema_decay == o.ema_decay &&
           checkpoint_interval == o.checkpoint_interval && seed == o.seed && clip_norm == o.clip_norm &&
           ema_for_eval == o.ema_for_eval;
  }
};

enum class FeatureSide { Human, Animal };

struct EvalConfig {
  int runs = 20;
  int pool = 32;
  int diversity_pairs_id = 64;
  int diversity_pairs_ood = 1024;
  int mm_generations = 20;
  int mm_subset = 5;
  int max_captions = 256;
  std::uint64_t seed = 2024;
  FeatureSide feature_side = FeatureSide::Animal;

  bool operator==(const EvalConfig&) const = default;
};

struct PathConfig {
  std::filesystem::path human_skeleton;
  std::filesystem::path animal_skeleton;
  std::filesystem::path correspondence;
  std::filesystem::path human_data;   // empty: synthesize from the dataset spec
  std::filesystem::path animal_data;
  std::filesystem::path embedding_table;  // empty: hash embedder

  bool operator==(const PathConfig&) const = default;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  LossWeights loss;
  DatasetSpec human_data;
  DatasetSpec animal_data;
  PathConfig paths;
  EvalConfig eval;
  std::uint64_t embed_seed = kDefaultEmbedSeed;

  bool operator==(const RunConfig& o) const;
};

/// Directory holding the bundled skeletons, honouring $OMGPT_DATA_DIR.
std::filesystem::path default_data_dir();

/// Fills every unset key with its default; relative paths resolve against
/// `base`. [model] primal_slots defaults to the correspondence size.
/// Throws ConfigError (bad values, unknown keys) or the loaders' errors.
RunConfig resolve_config(const ConfigFile& file, const std::filesystem::path& base = {});
RunConfig load_config(const std::filesystem::path& path);

/// Every key with its resolved value; resolve_config(parse(render(c))) == c.
std::string render_config(const RunConfig& cfg);

}  // namespace omgpt
