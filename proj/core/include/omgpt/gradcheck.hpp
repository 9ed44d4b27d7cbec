#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "omgpt/config.hpp"
#include "omgpt/tensor.hpp"

namespace omgpt {

struct GradcheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  int coordinates = 3;  // sampled per leaf tensor
  std::uint64_t seed = 5;
};

struct GradcheckResult {
  std::string name;
  double relative_error = 0.0;  // |analytic - numeric| / max(|analytic|, |numeric|, 1e-7) over sampled coordinates
  std::size_t coordinates = 0;
  bool passed = false;
};

/// Central-difference check of d f / d leaves on sampled coordinates, in 64-bit.
/// The error compares the sampled gradient vectors as a whole; a per-leaf
/// ratio is meaningless for leaves whose true gradient is zero.
GradcheckResult check_gradient(const std::string& name, const std::vector<tc::Tensor<double>>& leaves,
                               const std::function<tc::Tensor<double>()>& f, const GradcheckOptions& opts,
                               std::mt19937_64& rng);

/// Same as check_gradient for several scalar outputs of one forward pass, so
/// each perturbation costs a single evaluation.
std::vector<GradcheckResult> check_gradients(const std::vector<std::string>& names,
                                             const std::vector<tc::Tensor<double>>& leaves,
                                             const std::function<std::vector<tc::Tensor<double>>()>& f,
                                             const GradcheckOptions& opts, std::mt19937_64& rng);

/// Every differentiable tensor op on random inputs whose shapes are drawn
/// from `opts.seed`.
std::vector<GradcheckResult> gradcheck_ops(const GradcheckOptions& opts);

/// Every loss component and the total objective with respect to all model
/// parameters, on a double-precision model built from `cfg`.
std::vector<GradcheckResult> gradcheck_losses(const RunConfig& cfg, const GradcheckOptions& opts);

}  // namespace omgpt
