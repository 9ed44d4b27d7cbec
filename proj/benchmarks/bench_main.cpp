#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "omgpt/metrics.hpp"
#include "omgpt/rotmath.hpp"
#include "omgpt/skeleton.hpp"
#include "omgpt/tensor.hpp"

using namespace omgpt;
using TF = tc::Tensor<float>;

namespace {

std::vector<float> noise(std::int64_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> d(0.0f, 1.0f);
  std::vector<float> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = d(rng);
  return v;
}

TF param(tc::Shape s, std::uint64_t seed) {
  const auto n = tc::numel(s);
  return TF::parameter(std::move(s), noise(n, seed));
}

void BM_Matmul(benchmark::State& state) {
  const std::int64_t n = state.range(0);
  const TF a = TF::constant({n, n}, noise(n * n, 1));
  const TF b = TF::constant({n, n}, noise(n * n, 2));
  tc::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(tc::matmul(a, b).values().data());
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

// token counts on both sides of the short/long attention kernel switch
void BM_AttentionForwardBackward(benchmark::State& state) {
  const std::int64_t tokens = state.range(0);
  const std::int64_t width = 64;
  const TF q = param({4, tokens, width}, 3);
  const TF k = param({4, tokens, width}, 4);
  const TF v = param({4, tokens, width}, 5);
  for (auto _ : state) {
    q.node()->grad.clear();
    k.node()->grad.clear();
    v.node()->grad.clear();
    tc::backward(tc::sum(tc::multi_head_attention(q, k, v, 2, true)));
  }
}
BENCHMARK(BM_AttentionForwardBackward)->Arg(49)->Arg(196);

void BM_ForwardKinematics(benchmark::State& state) {
  const auto g = load_skeleton(std::filesystem::path(OMGPT_BENCH_DATA_DIR) / "smpl.json");
  const auto frames = static_cast<std::size_t>(state.range(0));
  MotionSequence m = MotionSequence::identity(g.name(), frames, g.joint_count());
  for (std::size_t t = 0; t < frames; ++t) m.global_translation(static_cast<Eigen::Index>(t), 1) = 0.9;
  for (auto _ : state) benchmark::DoNotOptimize(forward_kinematics(m, g));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frames * g.joint_count()));
}
BENCHMARK(BM_ForwardKinematics)->Arg(196);

void BM_Fid(benchmark::State& state) {
  const auto d = static_cast<Eigen::Index>(state.range(0));
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd;
  FeatureMatrix a(256, d), b(256, d);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a.data()[i] = nd(rng);
    b.data()[i] = nd(rng) + 0.5;
  }
  const auto sa = GaussianStats::from_features(a);
  const auto sb = GaussianStats::from_features(b);
  for (auto _ : state) benchmark::DoNotOptimize(fid(sa, sb));
}
BENCHMARK(BM_Fid)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
