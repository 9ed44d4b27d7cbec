#include "omgpt/optim.hpp"

#include <algorithm>
#include <cmath>

#include "omgpt/checkpoint.hpp"
#include "omgpt/error.hpp"

namespace omgpt::tc {

template <typename T>
Tensor<T> ParameterSet<T>::add(std::string name, Shape shape, std::vector<T> values) {
  for (const auto& e : entries_) {
    if (e.name == name) fail(ErrorCode::StateMismatch, "parameter '" + name + "' registered twice");
  }
  auto t = Tensor<T>::parameter(std::move(shape), std::move(values));
  entries_.push_back({std::move(name), t});
  return t;
}

template <typename T>
std::int64_t ParameterSet<T>::scalar_count() const {
  std::int64_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

template <typename T>
const Tensor<T>& ParameterSet<T>::get(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.tensor;
  }
  fail(ErrorCode::StateMismatch, "no parameter named '" + name + "'");
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

template <typename T>
double ParameterSet<T>::grad_norm() const {
  double ss = 0.0;
  for (const auto& e : entries_) {
    for (T g : e.tensor.grad()) ss += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(ss);
}

template <typename T>
double ParameterSet<T>::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (norm > max_norm && norm > 0.0) {
    const T factor = static_cast<T>(max_norm / norm);
    for (auto& e : entries_) {
      for (T& g : e.tensor.node()->grad) g *= factor;
    }
  }
  return norm;
}

template <typename T>
std::vector<NamedArray> ParameterSet<T>::export_arrays(const std::string& prefix) const {
  std::vector<NamedArray> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) {
    NamedArray a{prefix + e.name, e.tensor.shape(), {}};
    a.values.assign(e.tensor.values().begin(), e.tensor.values().end());
    out.push_back(std::move(a));
  }
  return out;
}

template <typename T>
void ParameterSet<T>::import_arrays(const std::vector<NamedArray>& arrays, const std::string& prefix) {
  for (auto& e : entries_) {
    const NamedArray* a = find_array(arrays, prefix + e.name);
    if (!a) fail(ErrorCode::StateMismatch, "checkpoint lacks parameter '" + prefix + e.name + "'");
    if (a->shape != e.tensor.shape()) {
      fail(ErrorCode::StateMismatch, "parameter '" + e.name + "' has shape " + to_string(e.tensor.shape()) +
                                         ", checkpoint has " + to_string(a->shape));
    }
    auto dst = e.tensor.mutable_values();
    std::transform(a->values.begin(), a->values.end(), dst.begin(), [](float f) { return static_cast<T>(f); });
  }
}

template <typename T>
std::vector<T> uniform_init(std::int64_t count, std::int64_t fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::int64_t>(fan_in, 1)));
  std::vector<T> out(static_cast<std::size_t>(count));
  for (auto& v : out) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
    v = static_cast<T>((2.0 * u - 1.0) * bound);
  }
  return out;
}

namespace {

template <typename T>
void check_names(const std::vector<std::string>& names, const ParameterSet<T>& params, const char* what) {
  bool ok = names.size() == params.size();
  for (std::size_t i = 0; ok && i < names.size(); ++i) ok = names[i] == params.entries()[i].name;
  if (!ok) fail(ErrorCode::StateMismatch, std::string(what) + " state was built for a different parameter list");
}

template <typename T>
std::vector<NamedArray> export_buffers(const std::string& prefix, const std::vector<std::string>& names,
                                       const std::vector<std::vector<T>>& buffers) {
  std::vector<NamedArray> out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    NamedArray a{prefix + names[i], {static_cast<std::int64_t>(buffers[i].size())}, {}};
    a.values.assign(buffers[i].begin(), buffers[i].end());
    out.push_back(std::move(a));
  }
  return out;
}

template <typename T>
void import_buffers(const std::vector<NamedArray>& arrays, const std::string& prefix,
                    const std::vector<std::string>& names, std::vector<std::vector<T>>& buffers) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    const NamedArray* a = find_array(arrays, prefix + names[i]);
    if (!a || a->values.size() != buffers[i].size()) {
      fail(ErrorCode::StateMismatch, "optimizer state lacks '" + prefix + names[i] + "'");
    }
    std::transform(a->values.begin(), a->values.end(), buffers[i].begin(), [](float f) { return static_cast<T>(f); });
  }
}

}  // namespace

template <typename T>
AdamState<T>::AdamState(const ParameterSet<T>& params, AdamConfig cfg) : config(cfg) {
  for (const auto& e : params.entries()) {
    names.push_back(e.name);
    first_moment.emplace_back(e.tensor.values().size(), T(0));
    second_moment.emplace_back(e.tensor.values().size(), T(0));
  }
}

template <typename T>
std::vector<NamedArray> AdamState<T>::export_arrays() const {
  auto out = export_buffers("adam.m.", names, first_moment);
  auto v = export_buffers("adam.v.", names, second_moment);
  out.insert(out.end(), v.begin(), v.end());
  return out;
}

template <typename T>
void AdamState<T>::import_arrays(const std::vector<NamedArray>& arrays) {
  import_buffers(arrays, "adam.m.", names, first_moment);
  import_buffers(arrays, "adam.v.", names, second_moment);
}

template <typename T>
void adam_step(ParameterSet<T>& params, AdamState<T>& state) {
  check_names(state.names, params, "Adam");
  const auto& c = state.config;
  state.step += 1;
  const T b1 = static_cast<T>(c.beta1);
  const T b2 = static_cast<T>(c.beta2);
  const T correction1 = static_cast<T>(1.0 - std::pow(c.beta1, static_cast<double>(state.step)));
  const T correction2 = static_cast<T>(1.0 - std::pow(c.beta2, static_cast<double>(state.step)));
  const T lr = static_cast<T>(c.lr);
  const T eps = static_cast<T>(c.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& tensor = params.entries()[i].tensor;
    const auto grad = tensor.grad();
    if (grad.empty()) continue;  // untouched this step: zero gradient, moments decay lazily
    auto value = tensor.mutable_values();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t k = 0; k < value.size(); ++k) {
      m[k] = b1 * m[k] + (T(1) - b1) * grad[k];
      v[k] = b2 * v[k] + (T(1) - b2) * grad[k] * grad[k];
      const T mhat = m[k] / correction1;
      const T vhat = v[k] / correction2;
      value[k] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

template <typename T>
EmaState<T>::EmaState(const ParameterSet<T>& params, double d) : decay(d) {
  for (const auto& e : params.entries()) {
    names.push_back(e.name);
    shadow.emplace_back(e.tensor.values().begin(), e.tensor.values().end());
  }
}

template <typename T>
std::vector<NamedArray> EmaState<T>::export_arrays() const {
  return export_buffers("ema.", names, shadow);
}

template <typename T>
void EmaState<T>::import_arrays(const std::vector<NamedArray>& arrays) {
  import_buffers(arrays, "ema.", names, shadow);
}

template <typename T>
void ema_update(const ParameterSet<T>& params, EmaState<T>& state) {
  check_names(state.names, params, "EMA");
  const T d = static_cast<T>(state.decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto value = params.entries()[i].tensor.values();
    auto& s = state.shadow[i];
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = d * s[k] + (T(1) - d) * value[k];
  }
}

template <typename T>
void ema_swap(ParameterSet<T>& params, EmaState<T>& state) {
  check_names(state.names, params, "EMA");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = params.entries()[i].tensor.mutable_values();
    std::swap_ranges(value.begin(), value.end(), state.shadow[i].begin());
  }
}

#define OMGPT_INSTANTIATE(T)                                                               \
  template class ParameterSet<T>;                                                          \
  template std::vector<T> uniform_init<T>(std::int64_t, std::int64_t, std::mt19937_64&);   \
  template struct AdamState<T>;                                                            \
  template void adam_step<T>(ParameterSet<T>&, AdamState<T>&);                             \
  template struct EmaState<T>;                                                             \
  template void ema_update<T>(const ParameterSet<T>&, EmaState<T>&);                       \
  template void ema_swap<T>(ParameterSet<T>&, EmaState<T>&);

OMGPT_INSTANTIATE(float)
OMGPT_INSTANTIATE(double)

#undef OMGPT_INSTANTIATE

}  // namespace omgpt::tc
