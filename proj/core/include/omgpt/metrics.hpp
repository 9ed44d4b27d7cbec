#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace omgpt {

/// Rows are samples.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

  /// Sample mean and unbiased covariance. Throws TooFewSamples or NonFiniteStats.
  static GaussianStats from_features(const FeatureMatrix& features);
  /// Throws NonFiniteStats, or ValidationError when the covariance is not
  /// symmetric (1e-9) or has an eigenvalue below -1e-8.
  void validate() const;
};

/// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}), with the trace of the
/// square root taken from the symmetric form S_a^{1/2} S_b S_a^{1/2}.
double fid(const GaussianStats& a, const GaussianStats& b);

/// Mean Euclidean distance between aligned rows. Throws DimensionMismatch.
double mm_dist(const FeatureMatrix& pred, const FeatureMatrix& text);

/// Mean distance over `pairs` seeded random pairs of distinct rows. Throws TooFewSamples.
double diversity(const FeatureMatrix& pred, int pairs, std::uint64_t seed);

/// Per caption, two seeded random subsets of `subset` generations (each drawn
/// without replacement) are paired index-wise; returns the mean pair distance
/// over all captions. Throws TooFewSamples.
double mmodality(const std::vector<FeatureMatrix>& per_caption, int subset, std::uint64_t seed);

/// Top-1/2/3 retrieval accuracy. For each row i the candidates are text row i
/// plus pool-1 distinct seeded random other rows; the rank of the true text is
/// 1 + the number of candidates strictly closer to pred row i.
/// Throws PoolTooLarge or DimensionMismatch.
std::array<double, 3> r_precision(const FeatureMatrix& pred, const FeatureMatrix& text, int pool,
                                  std::uint64_t seed);

}  // namespace omgpt
