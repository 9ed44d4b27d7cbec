#include "omgpt/metrics.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>

#include "omgpt/error.hpp"
#include "omgpt/random.hpp"

namespace omgpt {

GaussianStats GaussianStats::from_features(const FeatureMatrix& f) {
  if (f.rows() < 2) fail(ErrorCode::TooFewSamples, "statistics need at least two samples");
  if (!f.allFinite()) fail(ErrorCode::NonFiniteStats, "non-finite feature values");
  GaussianStats s;
  s.mean = f.colwise().mean().transpose();
  const FeatureMatrix centered = f.rowwise() - s.mean.transpose();
  s.covariance = (centered.transpose() * centered) / static_cast<double>(f.rows() - 1);
  s.covariance = 0.5 * (s.covariance + s.covariance.transpose()).eval();
  return s;
}

void GaussianStats::validate() const {
  if (!mean.allFinite() || !covariance.allFinite()) fail(ErrorCode::NonFiniteStats, "non-finite Gaussian statistics");
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size()) {
    fail(ErrorCode::DimensionMismatch, "covariance does not match mean dimension");
  }
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
    fail(ErrorCode::ValidationError, "covariance is not symmetric");
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-8) fail(ErrorCode::ValidationError, "covariance is not positive semidefinite");
}

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

double fid(const GaussianStats& a, const GaussianStats& b) {
  a.validate();
  b.validate();
  if (a.mean.size() != b.mean.size()) fail(ErrorCode::DimensionMismatch, "statistics differ in dimension");
  const Eigen::MatrixXd root_a = psd_sqrt(a.covariance);
  Eigen::MatrixXd inner = root_a * b.covariance * root_a;
  inner = 0.5 * (inner + inner.transpose()).eval();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(inner, Eigen::EigenvaluesOnly);
  const double trace_sqrt = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double value =
      (a.mean - b.mean).squaredNorm() + a.covariance.trace() + b.covariance.trace() - 2.0 * trace_sqrt;
  if (!std::isfinite(value)) fail(ErrorCode::NonFiniteStats, "FID is not finite");
  return value;
}

double mm_dist(const FeatureMatrix& pred, const FeatureMatrix& text) {
  if (pred.rows() != text.rows() || pred.cols() != text.cols()) {
    fail(ErrorCode::DimensionMismatch, "prediction and text features are not aligned");
  }
  if (pred.rows() == 0) fail(ErrorCode::TooFewSamples, "no samples");
  return (pred - text).rowwise().norm().mean();
}

double diversity(const FeatureMatrix& pred, int pairs, std::uint64_t seed) {
  if (pred.rows() < 2) fail(ErrorCode::TooFewSamples, "diversity needs at least two samples");
  if (pairs <= 0) fail(ErrorCode::ConfigError, "diversity needs a positive pair count");
  std::mt19937_64 rng(seed);
  const auto n = static_cast<std::uint64_t>(pred.rows());
  double total = 0.0;
  for (int k = 0; k < pairs; ++k) {
    const auto i = static_cast<Eigen::Index>(uniform_index(rng, n));
    auto j = static_cast<Eigen::Index>(uniform_index(rng, n - 1));
    if (j >= i) ++j;
    total += (pred.row(i) - pred.row(j)).norm();
  }
  return total / pairs;
}

double mmodality(const std::vector<FeatureMatrix>& per_caption, int subset, std::uint64_t seed) {
  if (per_caption.empty()) fail(ErrorCode::TooFewSamples, "no captions");
  if (subset <= 0) fail(ErrorCode::ConfigError, "subset size must be positive");
  std::mt19937_64 rng(seed);
  double total = 0.0;
  for (const auto& f : per_caption) {
    if (f.rows() < subset) {
      fail(ErrorCode::TooFewSamples, "caption has " + std::to_string(f.rows()) + " generations, subset needs " +
                                         std::to_string(subset));
    }
    std::vector<Eigen::Index> first(static_cast<std::size_t>(f.rows()));
    std::iota(first.begin(), first.end(), 0);
    std::vector<Eigen::Index> second = first;
    shuffle(first.begin(), first.end(), rng);
    shuffle(second.begin(), second.end(), rng);
    for (int k = 0; k < subset; ++k) {
      total += (f.row(first[static_cast<std::size_t>(k)]) - f.row(second[static_cast<std::size_t>(k)])).norm();
    }
  }
  return total / (static_cast<double>(subset) * static_cast<double>(per_caption.size()));
}

std::array<double, 3> r_precision(const FeatureMatrix& pred, const FeatureMatrix& text, int pool,
                                  std::uint64_t seed) {
  if (pred.rows() != text.rows() || pred.cols() != text.cols()) {
    fail(ErrorCode::DimensionMismatch, "prediction and text features are not aligned");
  }
  const Eigen::Index n = pred.rows();
  if (pool < 1 || pool > n) {
    fail(ErrorCode::PoolTooLarge, "pool of " + std::to_string(pool) + " exceeds " + std::to_string(n) + " samples");
  }
  std::mt19937_64 rng(seed);
  std::vector<Eigen::Index> others(static_cast<std::size_t>(n - 1));
  std::array<double, 3> hits{0.0, 0.0, 0.0};
  for (Eigen::Index i = 0; i < n; ++i) {
    std::iota(others.begin(), others.end(), 0);
    for (auto& o : others) {
      if (o >= i) ++o;
    }
    // partial Fisher-Yates: the first pool-1 entries become the distractors
    for (int k = 0; k < pool - 1; ++k) {
      const auto r = static_cast<std::size_t>(k) +
                     static_cast<std::size_t>(uniform_index(rng, static_cast<std::uint64_t>(others.size()) - k));
      std::swap(others[static_cast<std::size_t>(k)], others[r]);
    }
    const double truth = (pred.row(i) - text.row(i)).norm();
    int rank = 1;
    for (int k = 0; k < pool - 1; ++k) {
      if ((pred.row(i) - text.row(others[static_cast<std::size_t>(k)])).norm() < truth) ++rank;
    }
    for (int k = 0; k < 3; ++k) {
      if (rank <= k + 1) hits[static_cast<std::size_t>(k)] += 1.0;
    }
  }
  for (auto& h : hits) h /= static_cast<double>(n);
  return hits;
}

}  // namespace omgpt
