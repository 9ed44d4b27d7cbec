#include <gtest/gtest.h>

#include <functional>

#include "metric_oracle.hpp"
#include "omgpt/error.hpp"
#include "omgpt/metrics.hpp"
#include "support.hpp"

using namespace omgpt;

namespace {

FeatureMatrix random_features(std::mt19937_64& rng, int n, int d, double shift = 0.0) {
  FeatureMatrix f(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) f(i, j) = test::normal(rng) * (1.0 + 0.3 * j) + shift;
  }
  return f;
}

}  // namespace

TEST(Metrics, FidMatchesNaiveOracle) {
  std::mt19937_64 rng(1);
  for (int c = 0; c < 10; ++c) {
    const int d = 2 + c % 5;
    const auto a = random_features(rng, 40 + c, d);
    const auto b = random_features(rng, 64, d, 0.3 * c);
    const double got = fid(GaussianStats::from_features(a), GaussianStats::from_features(b));
    EXPECT_NEAR(got, test::naive_fid(test::rows_of(a), test::rows_of(b)), 1e-8);
  }
}

TEST(Metrics, FidClosedForms) {
  std::mt19937_64 rng(2);
  const auto s = GaussianStats::from_features(random_features(rng, 50, 4));
  EXPECT_NEAR(fid(s, s), 0.0, 1e-8);
  GaussianStats a{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1)};
  GaussianStats b{Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Identity(1, 1)};
  EXPECT_NEAR(fid(a, b), 1.0, 1e-8);
}

TEST(Metrics, FidRejectsBadStatistics) {
  GaussianStats a{Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)};
  GaussianStats asym = a;
  asym.covariance(0, 1) = 0.5;
  EXPECT_THROW(fid(a, asym), Error);
  GaussianStats neg = a;
  neg.covariance(1, 1) = -1.0;
  EXPECT_THROW(fid(a, neg), Error);
  GaussianStats nan = a;
  nan.mean(0) = std::nan("");
  EXPECT_THROW(fid(a, nan), Error);
  EXPECT_THROW(GaussianStats::from_features(FeatureMatrix::Zero(1, 3)), Error);
}

TEST(Metrics, DistanceMetricsMatchNaiveOracles) {
  std::mt19937_64 rng(3);
  for (int c = 0; c < 10; ++c) {
    const int n = 8 + 5 * c;
    const auto p = random_features(rng, n, 6);
    const auto t = random_features(rng, n, 6);
    const auto rp = test::rows_of(p), rt = test::rows_of(t);
    EXPECT_NEAR(mm_dist(p, t), test::naive_mm_dist(rp, rt), 1e-8);
    EXPECT_NEAR(diversity(p, 300, 11 + c), test::naive_diversity(rp, 300, 11 + c), 1e-8);
    const int pool = std::min(n, 32);
    const auto got = r_precision(p, t, pool, 5 + c);
    const auto want = test::naive_r_precision(rp, rt, pool, 5 + c);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(got[static_cast<std::size_t>(k)], want[static_cast<std::size_t>(k)], 1e-8);
    std::vector<FeatureMatrix> groups;
    std::vector<test::Rows> naive_groups;
    for (int g = 0; g < 4; ++g) {
      groups.push_back(random_features(rng, 10, 6));
      naive_groups.push_back(test::rows_of(groups.back()));
    }
    EXPECT_NEAR(mmodality(groups, 5, 21 + c), test::naive_mmodality(naive_groups, 5, 21 + c), 1e-8);
  }
}

TEST(Metrics, RPrecisionIsPerfectForIdenticalFeatures) {
  std::mt19937_64 rng(4);
  const auto p = random_features(rng, 40, 5);
  const auto r = r_precision(p, p, 32, 1);
  EXPECT_EQ(r[0], 1.0);
}

TEST(Metrics, ArgumentErrors) {
  std::mt19937_64 rng(5);
  const auto p = random_features(rng, 10, 3);
  auto code = [](const std::function<void()>& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::ConfigError;
  };
  EXPECT_EQ(code([&] { r_precision(p, p, 11, 1); }), ErrorCode::PoolTooLarge);
  EXPECT_EQ(code([&] { mm_dist(p, random_features(rng, 9, 3)); }), ErrorCode::DimensionMismatch);
  EXPECT_EQ(code([&] { diversity(random_features(rng, 1, 3), 5, 1); }), ErrorCode::TooFewSamples);
  EXPECT_EQ(code([&] { mmodality({random_features(rng, 3, 3)}, 5, 1); }), ErrorCode::TooFewSamples);
}
