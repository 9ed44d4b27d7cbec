#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "omgpt/optim.hpp"
#include "omgpt/tensor.hpp"

namespace omgpt::nn {

using tc::ParameterSet;
using tc::Tensor;

template <typename T>
struct Linear {
  Tensor<T> weight;  // [in, out]
  Tensor<T> bias;    // [out]

  static Linear create(ParameterSet<T>& params, const std::string& name, std::int64_t in, std::int64_t out,
                       std::mt19937_64& rng);
  Tensor<T> operator()(const Tensor<T>& x) const { return tc::linear(x, weight, bias); }
};

template <typename T>
struct LayerNorm {
  Tensor<T> gamma;
  Tensor<T> beta;

  static LayerNorm create(ParameterSet<T>& params, const std::string& name, std::int64_t width);
  Tensor<T> operator()(const Tensor<T>& x) const { return tc::layer_norm(x, gamma, beta); }
};

/// Learned additive table of shape [tokens, width].
template <typename T>
Tensor<T> positional_table(ParameterSet<T>& params, const std::string& name, std::int64_t tokens, std::int64_t width,
                           std::mt19937_64& rng);

/// Pre-norm transformer block: x + MHA(LN(x)), then x + FFN(LN(x)).
template <typename T>
struct TransformerLayer {
  LayerNorm<T> attn_norm;
  Linear<T> query, key, value, out;
  LayerNorm<T> ffn_norm;
  Linear<T> ffn_in, ffn_out;
  int heads = 1;

  static TransformerLayer create(ParameterSet<T>& params, const std::string& name, std::int64_t width, int heads,
                                 std::int64_t ffn_width, std::mt19937_64& rng);
  /// x: [batch, tokens, width]
  Tensor<T> operator()(const Tensor<T>& x, bool causal, std::span<const std::uint8_t> key_mask) const;
};

/// Stack of TransformerLayer followed by a final LayerNorm.
template <typename T>
struct Transformer {
  std::vector<TransformerLayer<T>> layers;
  LayerNorm<T> final_norm;

  static Transformer create(ParameterSet<T>& params, const std::string& name, int depth, std::int64_t width,
                            int heads, std::int64_t ffn_width, std::mt19937_64& rng);
  Tensor<T> operator()(const Tensor<T>& x, bool causal = false, std::span<const std::uint8_t> key_mask = {}) const;
};

}  // namespace omgpt::nn
