#include "omgpt/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "omgpt/crossdomain.hpp"
#include "omgpt/error.hpp"
#include "omgpt/random.hpp"
#include "omgpt/trainer.hpp"

namespace omgpt {

using tc::Shape;
using TD = tc::Tensor<double>;

std::vector<GradcheckResult> check_gradients(const std::vector<std::string>& names, const std::vector<TD>& leaves,
                                             const std::function<std::vector<TD>()>& f,
                                             const GradcheckOptions& opts, std::mt19937_64& rng) {
  const std::size_t outputs = names.size();
  std::vector<std::vector<std::size_t>> coords;
  for (const TD& leaf : leaves) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(leaf.numel()));
    std::iota(idx.begin(), idx.end(), 0);
    shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(idx.size(), static_cast<std::size_t>(opts.coordinates)));
    coords.push_back(std::move(idx));
  }

  // analytic[o][leaf][k]: one backward pass per output over the shared graph
  std::vector<std::vector<std::vector<double>>> analytic(outputs);
  {
    const std::vector<TD> values = f();
    if (values.size() != outputs) fail(ErrorCode::LengthMismatch, "gradcheck output count mismatch");
    for (std::size_t o = 0; o < outputs; ++o) {
      for (TD leaf : leaves) leaf.zero_grad();
      tc::backward(values[o]);
      for (std::size_t l = 0; l < leaves.size(); ++l) {
        const auto grad = leaves[l].grad();
        auto& out = analytic[o].emplace_back();
        for (std::size_t i : coords[l]) out.push_back(grad.empty() ? 0.0 : grad[i]);
      }
    }
    for (TD leaf : leaves) leaf.zero_grad();
  }

  std::vector<GradcheckResult> results;
  for (const auto& n : names) results.push_back({n, 0.0, 0, true});
  tc::NoGradGuard no_grad;
  auto evaluate = [&] {
    std::vector<double> v;
    for (const TD& t : f()) v.push_back(t.item());
    return v;
  };
  std::vector<double> diff(outputs), a_norm(outputs), n_norm(outputs);
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    TD leaf = leaves[l];
    for (std::size_t k = 0; k < coords[l].size(); ++k) {
      auto values = leaf.mutable_values();
      const std::size_t i = coords[l][k];
      const double saved = values[i];
      values[i] = saved + opts.step;
      const auto up = evaluate();
      values[i] = saved - opts.step;
      const auto down = evaluate();
      values[i] = saved;
      for (std::size_t o = 0; o < outputs; ++o) {
        const double numeric = (up[o] - down[o]) / (2.0 * opts.step);
        const double a = analytic[o][l][k];
        diff[o] += (a - numeric) * (a - numeric);
        a_norm[o] += a * a;
        n_norm[o] += numeric * numeric;
      }
    }
  }
  for (std::size_t o = 0; o < outputs; ++o) {
    const double scale = std::max({std::sqrt(a_norm[o]), std::sqrt(n_norm[o]), 1e-7});
    results[o].relative_error = std::sqrt(diff[o]) / scale;
    for (const auto& c : coords) results[o].coordinates += c.size();
  }
  for (auto& r : results) r.passed = r.relative_error < opts.tolerance;  // false for NaN
  return results;
}

GradcheckResult check_gradient(const std::string& name, const std::vector<TD>& leaves, const std::function<TD()>& f,
                               const GradcheckOptions& opts, std::mt19937_64& rng) {
  return check_gradients({name}, leaves, [&] { return std::vector<TD>{f()}; }, opts, rng).front();
}

namespace {

std::vector<double> random_values(std::int64_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = uniform(rng, lo, hi);
  return v;
}

TD leaf(const Shape& s, std::mt19937_64& rng) { return TD::parameter(s, random_values(tc::numel(s), rng)); }

}  // namespace

std::vector<GradcheckResult> gradcheck_ops(const GradcheckOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  GradcheckOptions every = opts;  // op inputs are small enough to check every coordinate
  every.coordinates = 1 << 20;
  std::vector<GradcheckResult> out;
  auto check = [&](const std::string& name, const std::vector<TD>& leaves, const std::function<TD()>& op) {
    // project onto a fixed random direction so the whole Jacobian is exercised
    const TD probe = op();
    const TD dir = TD::constant(probe.shape(), random_values(probe.numel(), rng));
    out.push_back(check_gradient(name, leaves, [&] { return tc::sum(tc::mul(op(), dir)); }, every, rng));
  };
  auto check_scalar = [&](const std::string& name, const std::vector<TD>& leaves, const std::function<TD()>& op) {
    out.push_back(check_gradient(name, leaves, op, every, rng));
  };
  auto dim = [&](std::int64_t lo, std::int64_t hi) { return lo + static_cast<std::int64_t>(uniform_index(rng, hi - lo + 1)); };
  auto indices = [&](std::size_t count, std::int64_t bound) {
    std::vector<int> v(count);
    for (auto& i : v) i = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(bound)));
    return v;
  };

  const std::int64_t B = dim(1, 3), M = dim(2, 4), K = dim(2, 5), N = dim(1, 4);
  const TD a = leaf({B, M, K}, rng);
  const TD bk = leaf({K}, rng);
  const TD bmk = leaf({M, K}, rng);
  check("add", {a, bk}, [&] { return tc::add(a, bk); });
  check("sub", {a, bmk}, [&] { return tc::sub(a, bmk); });
  check("mul", {a, bmk}, [&] { return tc::mul(a, bmk); });
  check("scale", {a}, [&] { return tc::scale(a, 1.7); });
  check("add_scalar", {a}, [&] { return tc::add_scalar(a, -0.3); });
  check("gelu", {a}, [&] { return tc::gelu(tc::scale(a, 3.0)); });

  const TD w = leaf({K, N}, rng);
  const TD wb = leaf({B, K, N}, rng);
  const TD bias = leaf({N}, rng);
  check("matmul_shared", {a, w}, [&] { return tc::matmul(a, w); });
  check("matmul_batched", {a, wb}, [&] { return tc::matmul(a, wb); });
  check("transpose", {a}, [&] { return tc::transpose(a); });
  check("linear", {a, w, bias}, [&] { return tc::linear(a, w, bias); });

  const TD c = leaf({B, dim(1, 3), K}, rng);
  check("reshape", {a}, [&] { return tc::reshape(a, {B * M, -1}); });
  check("concat", {a, c}, [&] { return tc::concat<double>({a, c}, 1); });
  const std::int64_t start = dim(0, K - 1), length = dim(1, K - start);
  check("slice", {a}, [&] { return tc::slice(a, 2, start, length); });
  const std::vector<int> gather_idx = indices(static_cast<std::size_t>(dim(1, 5)), M);  // repeats allowed
  check("gather", {a}, [&] { return tc::gather(a, 1, std::span<const int>(gather_idx)); });
  std::vector<int> scatter_idx(static_cast<std::size_t>(M + 2));
  std::iota(scatter_idx.begin(), scatter_idx.end(), 0);
  shuffle(scatter_idx.begin(), scatter_idx.end(), rng);
  scatter_idx.resize(static_cast<std::size_t>(M));
  check("scatter_zeros", {a}, [&] { return tc::scatter_zeros(a, 1, std::span<const int>(scatter_idx), M + 2); });
  const std::int64_t factor = dim(1, 3);
  check("replicate", {a}, [&] { return tc::replicate(a, 1, factor); });

  check_scalar("sum", {a}, [&] { return tc::sum(tc::mul(a, a)); });
  check_scalar("mean", {a}, [&] { return tc::mean(tc::mul(a, a)); });
  const int mean_axis = static_cast<int>(dim(0, 2));
  check("mean_axis", {a}, [&] { return tc::mean(a, mean_axis); });
  const std::int64_t window = dim(2, 4), windows = dim(2, 3);
  const TD seq = leaf({B, window * windows, N}, rng);
  std::vector<std::uint8_t> frame_mask(static_cast<std::size_t>(B * window * windows));
  for (std::int64_t b = 0; b < B; ++b) {
    const std::int64_t valid = dim(1, window * windows);  // trailing windows may be empty
    for (std::int64_t t = 0; t < window * windows; ++t) frame_mask[static_cast<std::size_t>(b * window * windows + t)] = t < valid;
  }
  check("window_mean", {seq}, [&] { return tc::window_mean(seq, 1, window, std::span<const std::uint8_t>(frame_mask)); });

  const int softmax_axis = static_cast<int>(dim(0, 2));
  check("softmax", {a}, [&] { return tc::softmax(tc::scale(a, 2.0), softmax_axis); });
  const TD gamma = leaf({K}, rng);
  const TD beta = leaf({K}, rng);
  check("layer_norm", {a, gamma, beta}, [&] { return tc::layer_norm(a, gamma, beta); });

  const std::int64_t heads = dim(1, 3), tokens = dim(2, 5);
  const Shape qkv{B, tokens, heads * dim(1, 3)};
  const TD q = leaf(qkv, rng);
  const TD k = leaf(qkv, rng);
  const TD v = leaf(qkv, rng);
  std::vector<std::uint8_t> key_mask(static_cast<std::size_t>(B * tokens));
  for (std::int64_t b = 0; b < B; ++b) {
    const std::int64_t valid = dim(1, tokens);
    for (std::int64_t t = 0; t < tokens; ++t) key_mask[static_cast<std::size_t>(b * tokens + t)] = t < valid;
  }
  const int h = static_cast<int>(heads);
  check("attention", {q, k, v}, [&] { return tc::multi_head_attention(q, k, v, h, false); });
  check("attention_causal", {q, k, v}, [&] { return tc::multi_head_attention(q, k, v, h, true); });
  check("attention_masked", {q, k, v},
        [&] { return tc::multi_head_attention(q, k, v, h, false, std::span<const std::uint8_t>(key_mask)); });

  const TD d = leaf({B, M, K}, rng);
  check("cosine_similarity", {a, d}, [&] { return tc::cosine_similarity(a, d); });
  check("l2_norm", {a}, [&] { return tc::l2_norm(a); });
  std::vector<double> weights = random_values(a.numel(), rng, 0.0, 1.0);
  for (std::size_t i = 0; i < weights.size(); i += 3) weights[i] = 0.0;
  check_scalar("mse", {a, d}, [&] { return tc::mse(a, d, std::span<const double>(weights)); });
  const TD six = leaf({B, M, 6}, rng);
  check("rot6d_to_matrix", {six}, [&] { return tc::rot6d_to_matrix(six); });
  return out;
}

std::vector<GradcheckResult> gradcheck_losses(const RunConfig& cfg, const GradcheckOptions& opts) {
  RunConfig small = cfg;
  small.human_data.samples_per_family = 1;
  small.animal_data.samples_per_family = 1;
  small.human_data.train_fraction = 0.5;
  small.animal_data.train_fraction = 0.5;
  small.human_data.frames.max_frames = std::min<std::size_t>(small.human_data.frames.max_frames, cfg.model.max_frames);
  small.animal_data.frames.max_frames =
      std::min<std::size_t>(small.animal_data.frames.max_frames, cfg.model.max_frames);
  small.human_data.frames.min_frames =
      std::min(small.human_data.frames.min_frames, small.human_data.frames.max_frames);
  small.animal_data.frames.min_frames =
      std::min(small.animal_data.frames.min_frames, small.animal_data.frames.max_frames);
  small.paths.human_data.clear();
  small.paths.animal_data.clear();
  const Workspace ws = Workspace::load(small);

  const auto model = OmgptModel<double>::create(cfg.model, ws.human, ws.animal, ws.correspondence, opts.seed);
  // two motions per side, of different families so the batch is not degenerate
  const auto& he = ws.human_data.entries;
  const auto& ae = ws.animal_data.entries;
  const MotionSequence* hm[] = {&he.front().motion, &he.back().motion};
  const MotionSequence* am[] = {&ae.front().motion, &ae.back().motion};
  const MotionBatch human = make_batch(hm, cfg.model.max_frames);
  const MotionBatch animal = make_batch(am, cfg.model.max_frames);
  const std::vector<std::string> hc = {he.front().captions[0], he.back().captions[0]};
  const std::vector<std::string> ac = {ae.front().captions[0], ae.back().captions[0]};
  const std::vector<std::string> sc = {subject_swap(hc[0], ae.front().subject), subject_swap(hc[1], ae.back().subject)};
  const EmbeddingProvider& text = *ws.embedder;
  const CaptionTensors<double> captions{caption_tensor<double>(text, hc), caption_tensor<double>(text, ac),
                                        caption_tensor<double>(text, sc)};

  std::vector<TD> leaves;
  for (const auto& p : model.params.entries()) leaves.push_back(p.tensor);

  std::mt19937_64 rng(opts.seed);
  const auto& names = TotalLoss<double>::component_names();
  return check_gradients({names.begin(), names.end()}, leaves,
                         [&]() -> std::vector<TD> {
                           const TotalLoss<double> l = total_loss(model, human, animal, captions, cfg.loss);
                           return {l.human.joint_recon,  l.human.clip,  l.human.text_recon,  l.human.translation,
                                   l.animal.joint_recon, l.animal.clip, l.animal.text_recon, l.animal.translation,
                                   l.consistency,        l.clip_cross,  l.end_effector,      l.total};
                         },
                         opts, rng);
}

}  // namespace omgpt
