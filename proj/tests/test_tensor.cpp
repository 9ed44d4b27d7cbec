#include <gtest/gtest.h>

#include <functional>

#include "omgpt/error.hpp"
#include "omgpt/gradcheck.hpp"
#include "omgpt/tensor.hpp"
#include "support.hpp"

using namespace omgpt;
using tc::Tensor;
using TD = Tensor<double>;

namespace {

TD random_param(std::mt19937_64& rng, tc::Shape shape) {
  std::vector<double> v(static_cast<std::size_t>(tc::numel(shape)));
  for (auto& x : v) x = test::normal(rng);
  return TD::parameter(std::move(shape), std::move(v));
}

}  // namespace

TEST(Tensor, EveryOpPassesGradcheckOnRandomShapes) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    GradcheckOptions opts;
    opts.seed = seed;
    for (const auto& r : gradcheck_ops(opts)) {
      EXPECT_TRUE(r.passed) << r.name << " seed " << seed << " error " << r.relative_error;
    }
  }
}

// The op audit uses short sequences; this covers the long-sequence attention path.
TEST(Tensor, LongSequenceAttentionGradients) {
  std::mt19937_64 rng(17);
  const std::int64_t batch = 2, tokens = 70, width = 8;
  const TD q = random_param(rng, {batch, tokens, width});
  const TD k = random_param(rng, {batch, tokens, width});
  const TD v = random_param(rng, {batch, tokens, width});
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(batch * tokens), 1);
  for (std::int64_t t = 55; t < tokens; ++t) mask[static_cast<std::size_t>(tokens + t)] = 0;
  const std::vector<double> dir = [&] {
    std::vector<double> d(static_cast<std::size_t>(batch * tokens * width));
    for (auto& x : d) x = test::normal(rng);
    return d;
  }();
  GradcheckOptions opts;
  opts.coordinates = 12;
  for (bool causal : {false, true}) {
    auto f = [&] {
      const TD y = tc::multi_head_attention(q, k, v, 2, causal, mask);
      return tc::sum(tc::mul(y, TD::constant(y.shape(), dir)));
    };
    const auto r = check_gradient("attention", {q, k, v}, f, opts, rng);
    EXPECT_TRUE(r.passed) << "causal " << causal << " error " << r.relative_error;
  }
}

TEST(Tensor, ShortAndLongAttentionPathsAgree) {
  // a 64-token and a 65-token call share their first 64 keys when the tail is masked
  std::mt19937_64 rng(5);
  const std::int64_t width = 8;
  const TD q = random_param(rng, {1, 65, width});
  const TD k = random_param(rng, {1, 65, width});
  const TD v = random_param(rng, {1, 65, width});
  std::vector<std::uint8_t> mask(65, 1);
  mask[64] = 0;
  tc::NoGradGuard guard;
  const TD longer = tc::multi_head_attention(q, k, v, 2, false, mask);
  const TD shorter = tc::multi_head_attention(tc::slice(q, 1, 0, 64), tc::slice(k, 1, 0, 64),
                                              tc::slice(v, 1, 0, 64), 2, false);
  for (std::int64_t i = 0; i < 64 * width; ++i) {
    EXPECT_NEAR(longer.values()[static_cast<std::size_t>(i)], shorter.values()[static_cast<std::size_t>(i)], 1e-12);
  }
}

TEST(Tensor, LeafGradientsAccumulateAcrossBackwardCalls) {
  std::mt19937_64 rng(2);
  const TD a = random_param(rng, {3, 4});
  const TD loss = tc::sum(tc::mul(a, a));
  tc::backward(loss);
  const std::vector<double> once(a.grad().begin(), a.grad().end());
  tc::backward(loss);
  for (std::size_t i = 0; i < once.size(); ++i) {
    EXPECT_DOUBLE_EQ(once[i], 2.0 * a.values()[i]);
    EXPECT_DOUBLE_EQ(a.grad()[i], 2.0 * once[i]);
  }
}

TEST(Tensor, SharedSubexpressionGradientsAdd) {
  const TD x = TD::parameter({1}, {3.0});
  const TD y = tc::mul(x, x);
  const TD z = tc::add(y, tc::mul(y, x));  // x^2 + x^3
  tc::backward(tc::sum(z));
  EXPECT_DOUBLE_EQ(x.grad()[0], 2 * 3.0 + 3 * 9.0);
}

TEST(Tensor, NoGradGuardSkipsRecording) {
  const TD x = TD::parameter({2}, {1.0, 2.0});
  TD y;
  {
    tc::NoGradGuard guard;
    EXPECT_FALSE(tc::grad_enabled());
    y = tc::mul(x, x);
  }
  EXPECT_TRUE(tc::grad_enabled());
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(y.node()->inputs.empty());
}

TEST(Tensor, ErrorsCarryCodes) {
  const TD a = TD::zeros({2, 3});
  auto code = [](const std::function<void()>& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::ConfigError;
  };
  EXPECT_EQ(code([&] { tc::backward(a); }), ErrorCode::NotScalar);
  EXPECT_EQ(code([&] { tc::add(a, TD::zeros({3, 2})); }), ErrorCode::ShapeMismatch);
  EXPECT_EQ(code([&] { tc::matmul(a, TD::zeros({2, 2})); }), ErrorCode::ShapeMismatch);
  EXPECT_EQ(code([&] { tc::softmax(a, 2); }), ErrorCode::InvalidAxis);
  EXPECT_EQ(code([&] { tc::reshape(a, {4, -1}); }), ErrorCode::ShapeMismatch);
}

TEST(Tensor, BroadcastAddsTrailingSuffix) {
  const TD a = TD::constant({2, 2, 3}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  const TD b = TD::constant({3}, {100, 200, 300});
  const TD c = tc::add(a, b);
  EXPECT_EQ(c.values()[4], 204.0);
  EXPECT_EQ(c.values()[11], 311.0);
}

TEST(Tensor, WindowMeanSkipsPaddingAndEmptyWindows) {
  const TD a = TD::constant({1, 6, 1}, {1, 3, 5, 100, 200, 300});
  const std::vector<std::uint8_t> mask{1, 1, 1, 0, 0, 0};
  const TD m = tc::window_mean(a, 1, 2, mask);
  ASSERT_EQ(m.shape(), (tc::Shape{1, 3, 1}));
  EXPECT_DOUBLE_EQ(m.values()[0], 2.0);
  EXPECT_DOUBLE_EQ(m.values()[1], 5.0);
  EXPECT_DOUBLE_EQ(m.values()[2], 0.0);
}

TEST(Tensor, Rot6dToMatrixMatchesScalarVersion) {
  std::mt19937_64 rng(8);
  const TD six = random_param(rng, {4, 6});
  const TD m = tc::rot6d_to_matrix(six);
  ASSERT_EQ(m.shape(), (tc::Shape{4, 3, 3}));
  for (int i = 0; i < 4; ++i) {
    double s[6];
    for (int k = 0; k < 6; ++k) s[k] = six.values()[static_cast<std::size_t>(i * 6 + k)];
    const Eigen::Matrix3d ref = [&] {
      const Eigen::Vector3d b1 = Eigen::Vector3d(s[0], s[1], s[2]).normalized();
      Eigen::Vector3d a2(s[3], s[4], s[5]);
      const Eigen::Vector3d b2 = (a2 - b1.dot(a2) * b1).normalized();
      Eigen::Matrix3d r;
      r << b1, b2, b1.cross(b2);
      return r;
    }();
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(m.values()[static_cast<std::size_t>(i * 9 + r * 3 + c)], ref(r, c), 1e-14);
    }
  }
}
