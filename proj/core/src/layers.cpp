#include "omgpt/layers.hpp"

namespace omgpt::nn {

template <typename T>
Linear<T> Linear<T>::create(ParameterSet<T>& params, const std::string& name, std::int64_t in, std::int64_t out,
                            std::mt19937_64& rng) {
  Linear l;
  l.weight = params.add(name + ".w", {in, out}, tc::uniform_init<T>(in * out, in, rng));
  l.bias = params.add(name + ".b", {out}, std::vector<T>(static_cast<std::size_t>(out), T(0)));
  return l;
}

template <typename T>
LayerNorm<T> LayerNorm<T>::create(ParameterSet<T>& params, const std::string& name, std::int64_t width) {
  const auto n = static_cast<std::size_t>(width);
  return {params.add(name + ".gamma", {width}, std::vector<T>(n, T(1))),
          params.add(name + ".beta", {width}, std::vector<T>(n, T(0)))};
}

template <typename T>
Tensor<T> positional_table(ParameterSet<T>& params, const std::string& name, std::int64_t tokens, std::int64_t width,
                           std::mt19937_64& rng) {
  // small scale so the content signal dominates at initialisation
  auto values = tc::uniform_init<T>(tokens * width, 1, rng);
  for (auto& v : values) v *= T(0.1);
  return params.add(name, {tokens, width}, std::move(values));
}

template <typename T>
TransformerLayer<T> TransformerLayer<T>::create(ParameterSet<T>& params, const std::string& name, std::int64_t width,
                                                int heads, std::int64_t ffn_width, std::mt19937_64& rng) {
  TransformerLayer l;
  l.attn_norm = LayerNorm<T>::create(params, name + ".attn_norm", width);
  l.query = Linear<T>::create(params, name + ".q", width, width, rng);
  l.key = Linear<T>::create(params, name + ".k", width, width, rng);
  l.value = Linear<T>::create(params, name + ".v", width, width, rng);
  l.out = Linear<T>::create(params, name + ".o", width, width, rng);
  l.ffn_norm = LayerNorm<T>::create(params, name + ".ffn_norm", width);
  l.ffn_in = Linear<T>::create(params, name + ".ffn_in", width, ffn_width, rng);
  l.ffn_out = Linear<T>::create(params, name + ".ffn_out", ffn_width, width, rng);
  l.heads = heads;
  return l;
}

template <typename T>
Tensor<T> TransformerLayer<T>::operator()(const Tensor<T>& x, bool causal,
                                          std::span<const std::uint8_t> key_mask) const {
  const Tensor<T> h = attn_norm(x);
  const Tensor<T> attended = tc::multi_head_attention(query(h), key(h), value(h), heads, causal, key_mask);
  const Tensor<T> y = tc::add(x, out(attended));
  return tc::add(y, ffn_out(tc::gelu(ffn_in(ffn_norm(y)))));
}

template <typename T>
Transformer<T> Transformer<T>::create(ParameterSet<T>& params, const std::string& name, int depth, std::int64_t width,
                                      int heads, std::int64_t ffn_width, std::mt19937_64& rng) {
  Transformer t;
  for (int i = 0; i < depth; ++i) {
    t.layers.push_back(
        TransformerLayer<T>::create(params, name + ".layer" + std::to_string(i), width, heads, ffn_width, rng));
  }
  t.final_norm = LayerNorm<T>::create(params, name + ".norm", width);
  return t;
}

template <typename T>
Tensor<T> Transformer<T>::operator()(const Tensor<T>& x, bool causal, std::span<const std::uint8_t> key_mask) const {
  Tensor<T> h = x;
  for (const auto& layer : layers) h = layer(h, causal, key_mask);
  return final_norm(h);
}

template struct Linear<float>;
template struct Linear<double>;
template struct LayerNorm<float>;
template struct LayerNorm<double>;
template struct TransformerLayer<float>;
template struct TransformerLayer<double>;
template struct Transformer<float>;
template struct Transformer<double>;
template Tensor<float> positional_table<float>(ParameterSet<float>&, const std::string&, std::int64_t, std::int64_t,
                                               std::mt19937_64&);
template Tensor<double> positional_table<double>(ParameterSet<double>&, const std::string&, std::int64_t, std::int64_t,
                                                 std::mt19937_64&);

}  // namespace omgpt::nn
