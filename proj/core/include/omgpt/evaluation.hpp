#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "omgpt/config.hpp"
#include "omgpt/crossdomain.hpp"
#include "omgpt/datagen.hpp"
#include "omgpt/metrics.hpp"

namespace omgpt {

enum class EvalMode { InDistribution, OutOfDistribution };

/// Clip-domain features of animal motions: E_t(E^a(m)), with E_t taken from the
/// animal side (default) or the human side; both read the shared latent layout.
FeatureMatrix extract_features(const OmgptModel<float>& model, const std::vector<const MotionSequence*>& motions,
                               FeatureSide side);

/// Caption embeddings as rows.
FeatureMatrix text_features(const EmbeddingProvider& provider, const std::vector<std::string>& captions);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation over runs
  std::vector<double> values;
};

struct EvalReport {
  EvalMode mode = EvalMode::InDistribution;
  std::uint64_t seed0 = 0;
  std::size_t captions = 0;
  std::size_t generations_per_caption = 0;
  std::map<std::string, MetricSummary> metrics;
  /// Mean L_cons of the transferred motions (first generation per caption).
  double transfer_consistency = 0.0;

  std::string to_json() const;
};

/// Generates `mm_generations` animal motions per evaluation caption from
/// held-out human motions of the same action, then repeats every metric over
/// `runs` seeded draws of one generation per caption.
///
/// ID captions come from the animal test split; OOD captions are human test
/// captions subject-swapped to a seeded species. Ground-truth statistics use
/// the animal test motions. Throws DataEmpty or PoolTooLarge.
EvalReport evaluate(const OmgptModel<float>& model, const Dataset& human, const Dataset& animal,
                    const EmbeddingProvider& provider, const EvalConfig& cfg, EvalMode mode);

}  // namespace omgpt
