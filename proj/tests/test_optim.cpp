#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "omgpt/checkpoint.hpp"
#include "omgpt/error.hpp"
#include "omgpt/optim.hpp"
#include "support.hpp"

using namespace omgpt;

namespace {

tc::ParameterSet<double> two_params() {
  tc::ParameterSet<double> p;
  p.add("a", {2}, {1.0, -2.0});
  p.add("b", {1, 2}, {0.5, 0.25});
  return p;
}

}  // namespace

TEST(Adam, MatchesClosedFormFirstSteps) {
  auto p = two_params();
  tc::AdamConfig cfg;
  cfg.lr = 0.1;
  tc::AdamState<double> state(p, cfg);
  const std::vector<double> grads{0.3, -0.7};
  double m = 0.0, v = 0.0, x = 1.0;
  for (int step = 1; step <= 3; ++step) {
    p.zero_grad();
    // d/da of sum(g * a)
    tc::backward(tc::sum(tc::mul(p.get("a"), tc::Tensor<double>::constant({2}, grads))));
    tc::adam_step(p, state);
    m = cfg.beta1 * m + (1 - cfg.beta1) * grads[0];
    v = cfg.beta2 * v + (1 - cfg.beta2) * grads[0] * grads[0];
    const double mh = m / (1 - std::pow(cfg.beta1, step));
    const double vh = v / (1 - std::pow(cfg.beta2, step));
    x -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
    EXPECT_NEAR(p.get("a").values()[0], x, 1e-14);
  }
  // b never received a gradient
  EXPECT_EQ(p.get("b").values()[0], 0.5);
}

TEST(Adam, GradientClippingBoundsTheGlobalNorm) {
  auto p = two_params();
  tc::backward(tc::sum(tc::scale(tc::mul(p.get("a"), p.get("a")), 10.0)));
  const double before = p.grad_norm();
  EXPECT_NEAR(before, 20.0 * std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(p.clip_grad_norm(1.0), before, 1e-12);
  EXPECT_NEAR(p.grad_norm(), 1.0, 1e-12);
}

TEST(Ema, TracksShadowsAndSwapIsAnInvolution) {
  auto p = two_params();
  tc::EmaState<double> ema(p, 0.9);
  p.entries()[0].tensor.mutable_values()[0] = 2.0;
  tc::ema_update(p, ema);
  EXPECT_NEAR(ema.shadow[0][0], 0.9 * 1.0 + 0.1 * 2.0, 1e-15);
  tc::ema_swap(p, ema);
  EXPECT_NEAR(p.get("a").values()[0], 1.1, 1e-15);
  tc::ema_swap(p, ema);
  EXPECT_EQ(p.get("a").values()[0], 2.0);
}

TEST(Adam, StateMismatchIsReported) {
  auto p = two_params();
  tc::AdamState<double> state(p, {});
  tc::ParameterSet<double> other;
  other.add("a", {3}, {1, 2, 3});
  EXPECT_THROW(tc::adam_step(other, state), Error);
  auto arrays = p.export_arrays();
  arrays[0].shape = {3};
  EXPECT_THROW(p.import_arrays(arrays), Error);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto dir = test::scratch_dir("checkpoint");
  std::vector<NamedArray> arrays{{"param.w", {2, 3}, {1.5f, -0.0f, 3e-38f, 1e30f, 2.f, 7.f}},
                                 {"s", {}, {42.f}},
                                 {"empty", {0}, {}}};
  write_checkpoint(dir / "c.bin", arrays);
  EXPECT_EQ(read_checkpoint(dir / "c.bin"), arrays);
  ASSERT_NE(find_array(arrays, "s"), nullptr);
  EXPECT_EQ(find_array(arrays, "nope"), nullptr);
}

TEST(Checkpoint, CorruptFilesAreRejected) {
  const auto dir = test::scratch_dir("checkpoint_bad");
  auto code = [](const std::filesystem::path& p) {
    try {
      read_checkpoint(p);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::ConfigError;
  };
  EXPECT_EQ(code(dir / "absent.bin"), ErrorCode::CheckpointMissing);
  {
    std::ofstream(dir / "magic.bin", std::ios::binary) << "NOPE\x01\0\0\0";
  }
  EXPECT_EQ(code(dir / "magic.bin"), ErrorCode::VersionMismatch);
  write_checkpoint(dir / "t.bin", {{"w", {100}, std::vector<float>(100, 1.f)}});
  std::filesystem::resize_file(dir / "t.bin", std::filesystem::file_size(dir / "t.bin") - 7);
  EXPECT_EQ(code(dir / "t.bin"), ErrorCode::ParseError);
}

TEST(Init, UniformInitRespectsFanIn) {
  std::mt19937_64 rng(1);
  const auto v = tc::uniform_init<double>(1000, 16, rng);
  for (double x : v) EXPECT_LE(std::abs(x), 0.25);
  std::mt19937_64 again(1);
  EXPECT_EQ(tc::uniform_init<double>(1000, 16, again), v);
}
