#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "omgpt/tensor.hpp"

namespace omgpt {

struct NamedArray;

namespace tc {

template <typename T>
struct NamedParameter {
  std::string name;
  Tensor<T> tensor;
};

/// Ordered, named collection of trainable leaves. Order is registration order
/// and is what optimizer state and checkpoints are keyed against.
template <typename T>
class ParameterSet {
 public:
  Tensor<T> add(std::string name, Shape shape, std::vector<T> values);

  std::vector<NamedParameter<T>>& entries() { return entries_; }
  const std::vector<NamedParameter<T>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::int64_t scalar_count() const;
  const Tensor<T>& get(const std::string& name) const;

  void zero_grad();
  /// Global L2 norm over all parameter gradients (missing gradients count as zero).
  double grad_norm() const;
  /// Rescales gradients so the global norm is at most `max_norm`. Returns the pre-clip norm.
  double clip_grad_norm(double max_norm);

  std::vector<NamedArray> export_arrays(const std::string& prefix = "") const;
  /// Copies values by name; throws StateMismatch on missing names or shapes.
  void import_arrays(const std::vector<NamedArray>& arrays, const std::string& prefix = "");

 private:
  std::vector<NamedParameter<T>> entries_;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) values from a 53-bit mantissa draw,
/// so initialisation is identical across standard libraries.
template <typename T>
std::vector<T> uniform_init(std::int64_t count, std::int64_t fan_in, std::mt19937_64& rng);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<std::string> names;
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;

  AdamState() = default;
  AdamState(const ParameterSet<T>& params, AdamConfig cfg);

  std::vector<NamedArray> export_arrays() const;
  void import_arrays(const std::vector<NamedArray>& arrays);
};

/// One bias-corrected Adam update from the gradients currently held by `params`.
/// Throws StateMismatch when the state was built for a different parameter list.
template <typename T>
void adam_step(ParameterSet<T>& params, AdamState<T>& state);

template <typename T>
struct EmaState {
  double decay = 0.99;
  std::vector<std::string> names;
  std::vector<std::vector<T>> shadow;

  EmaState() = default;
  /// Shadows start as copies of the current parameter values.
  EmaState(const ParameterSet<T>& params, double decay);

  std::vector<NamedArray> export_arrays() const;
  void import_arrays(const std::vector<NamedArray>& arrays);
};

/// shadow <- decay * shadow + (1 - decay) * param
template <typename T>
void ema_update(const ParameterSet<T>& params, EmaState<T>& state);

/// Exchanges live and shadow values; applying it twice restores both.
template <typename T>
void ema_swap(ParameterSet<T>& params, EmaState<T>& state);

}  // namespace tc
}  // namespace omgpt
