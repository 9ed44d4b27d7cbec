#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "omgpt/metrics.hpp"
#include "omgpt/random.hpp"

// Straight-line reference versions of the evaluation metrics. They share only
// the seeded draw protocol with the library; arithmetic is plain loops.
namespace omgpt::test {

using Rows = std::vector<std::vector<double>>;

inline Rows rows_of(const FeatureMatrix& f) {
  Rows r(static_cast<std::size_t>(f.rows()), std::vector<double>(static_cast<std::size_t>(f.cols())));
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    for (Eigen::Index j = 0; j < f.cols(); ++j) r[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = f(i, j);
  }
  return r;
}

inline double dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

/// Trace of sqrt(S_a S_b) from the eigenvalues of the (non-symmetric) product.
inline double naive_fid(const Rows& x, const Rows& y) {
  const std::size_t d = x[0].size();
  auto stats = [d](const Rows& r, std::vector<double>& mu, Eigen::MatrixXd& cov) {
    mu.assign(d, 0.0);
    for (const auto& row : r) {
      for (std::size_t k = 0; k < d; ++k) mu[k] += row[k] / static_cast<double>(r.size());
    }
    cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (const auto& row : r) {
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
          cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +=
              (row[i] - mu[i]) * (row[j] - mu[j]) / static_cast<double>(r.size() - 1);
        }
      }
    }
  };
  std::vector<double> ma, mb;
  Eigen::MatrixXd sa, sb;
  stats(x, ma, sa);
  stats(y, mb, sb);
  const Eigen::EigenSolver<Eigen::MatrixXd> eig(sa * sb);
  double trace_sqrt = 0.0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) trace_sqrt += std::sqrt(eig.eigenvalues()(i)).real();
  double mean_term = 0.0;
  for (std::size_t k = 0; k < d; ++k) mean_term += (ma[k] - mb[k]) * (ma[k] - mb[k]);
  return mean_term + sa.trace() + sb.trace() - 2.0 * trace_sqrt;
}

inline double naive_mm_dist(const Rows& p, const Rows& t) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += dist(p[i], t[i]);
  return s / static_cast<double>(p.size());
}

inline double naive_diversity(const Rows& p, int pairs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double s = 0;
  for (int k = 0; k < pairs; ++k) {
    const auto i = uniform_index(rng, p.size());
    auto j = uniform_index(rng, p.size() - 1);
    if (j >= i) ++j;
    s += dist(p[i], p[j]);
  }
  return s / pairs;
}

inline double naive_mmodality(const std::vector<Rows>& per_caption, int subset, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double s = 0;
  for (const auto& f : per_caption) {
    std::vector<std::size_t> a(f.size()), b(f.size());
    std::iota(a.begin(), a.end(), 0);
    std::iota(b.begin(), b.end(), 0);
    shuffle(a.begin(), a.end(), rng);
    shuffle(b.begin(), b.end(), rng);
    for (int k = 0; k < subset; ++k) s += dist(f[a[static_cast<std::size_t>(k)]], f[b[static_cast<std::size_t>(k)]]);
  }
  return s / (subset * static_cast<double>(per_caption.size()));
}

inline std::array<double, 3> naive_r_precision(const Rows& p, const Rows& t, int pool, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::array<double, 3> hits{};
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) others.push_back(j);
    }
    for (std::size_t k = 0; k + 1 < static_cast<std::size_t>(pool); ++k) {
      const std::size_t r = k + uniform_index(rng, others.size() - k);
      std::swap(others[k], others[r]);
    }
    // sort the candidate pool by distance; ties leave the true text first
    std::vector<std::pair<double, int>> cand{{dist(p[i], t[i]), 0}};
    for (std::size_t k = 0; k + 1 < static_cast<std::size_t>(pool); ++k) cand.push_back({dist(p[i], t[others[k]]), 1});
    std::stable_sort(cand.begin(), cand.end());
    const auto rank = static_cast<std::size_t>(
        std::find_if(cand.begin(), cand.end(), [](const auto& c) { return c.second == 0; }) - cand.begin());
    for (std::size_t k = 0; k < 3; ++k) {
      if (rank <= k) hits[k] += 1.0 / static_cast<double>(n);
    }
  }
  return hits;
}

}  // namespace omgpt::test
