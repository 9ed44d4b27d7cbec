#include <gtest/gtest.h>

#include "omgpt/crossdomain.hpp"
#include "omgpt/error.hpp"
#include "omgpt/gradcheck.hpp"
#include "omgpt/trainer.hpp"
#include "support.hpp"

using namespace omgpt;
using TD = tc::Tensor<double>;

namespace {

struct ToyFixture {
  RunConfig cfg = test::toy_config();
  Workspace ws = Workspace::skeletons(cfg);
  OmgptModel<double> model = OmgptModel<double>::create(cfg.model, ws.human, ws.animal, ws.correspondence, 3);
};

ToyFixture& toy() {
  static ToyFixture f;
  return f;
}

MotionBatch batch_of(const std::vector<MotionSequence>& motions, std::int64_t frames) {
  std::vector<const MotionSequence*> ptrs;
  for (const auto& m : motions) ptrs.push_back(&m);
  return make_batch(ptrs, frames);
}

/// Same real frames, extra padding frames filled with noise.
MotionSequence with_noisy_padding(const MotionSequence& m, std::size_t frames, std::mt19937_64& rng,
                                  const SkeletonGraph& g) {
  MotionSequence p = pad_motion(m, frames);
  const auto noise = test::random_motion(rng, g, frames);
  for (std::size_t t = m.frames(); t < frames; ++t) {
    const auto T = static_cast<Eigen::Index>(t);
    p.global_rotation.row(T) = noise.global_rotation.row(T);
    p.global_translation.row(T) = 5.0 * noise.global_translation.row(T);
    p.joint_rotations.row(T) = noise.joint_rotations.row(T);
  }
  return p;
}

double max_abs_diff(const TD& a, const TD& b) {
  double m = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    m = std::max(m, std::abs(a.values()[static_cast<std::size_t>(i)] - b.values()[static_cast<std::size_t>(i)]));
  }
  return m;
}

}  // namespace

TEST(Model, LatentShapeOnBundledSkeletons) {
  // default widths; the slot count is inferred from the correspondence file
  const std::string d = test::data_dir().string();
  const RunConfig cfg = resolve_config(ConfigFile::parse("[paths]\nhuman_skeleton = " + d + "/smpl.json\nanimal_skeleton = " +
                                                         d + "/smal.json\ncorrespondence = " + d +
                                                         "/smpl_smal_correspondence.json\n"));
  const Workspace ws = Workspace::skeletons(cfg);
  const auto model = OmgptModel<float>::create(cfg.model, ws.human, ws.animal, ws.correspondence, 1);
  std::mt19937_64 rng(1);
  tc::NoGradGuard guard;
  for (const auto* side : {&model.human_ae, &model.animal_ae}) {
    const auto& g = side == &model.human_ae ? ws.human : ws.animal;
    const auto m = test::smooth_motion(rng, g, 60);
    const auto b = batch_of({m}, 196);
    const auto z = side->encode(batch_tensor<float>(b), b.mask);
    EXPECT_EQ(z.shape(), (tc::Shape{1, 49, 7, 16}));
    EXPECT_EQ(side->decode(z, b.mask).shape(), (tc::Shape{1, 196, static_cast<std::int64_t>(g.joint_count()) + 1, 6}));
  }
}

TEST(Model, PaddingContentDoesNotReachTheLatent) {
  auto& f = toy();
  std::mt19937_64 rng(2);
  const auto m = test::smooth_motion(rng, f.ws.human, 13);
  const auto a = batch_of({pad_motion(m, 32)}, 32);
  const auto b = batch_of({with_noisy_padding(m, 32, rng, f.ws.human)}, 32);
  tc::NoGradGuard guard;
  const TD za = f.model.human_ae.encode(batch_tensor<double>(a), a.mask);
  const TD zb = f.model.human_ae.encode(batch_tensor<double>(b), b.mask);
  EXPECT_EQ(max_abs_diff(za, zb), 0.0);
}

TEST(Model, DecodeIsDeterministicAndFinite) {
  auto& f = toy();
  const auto w = f.cfg.model.latent_frames();
  const TD z = TD::zeros({2, w, f.cfg.model.primal_slots, f.cfg.model.latent_width});
  const std::vector<std::uint8_t> mask(2 * 32, 1);
  tc::NoGradGuard guard;
  const TD a = f.model.animal_ae.decode(z, mask);
  const TD b = f.model.animal_ae.decode(z, mask);
  EXPECT_EQ(a.shape(), (tc::Shape{2, 32, static_cast<std::int64_t>(f.ws.animal.joint_count()) + 1, 6}));
  EXPECT_EQ(max_abs_diff(a, b), 0.0);
  for (double v : a.values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Model, LatentToClipIsAffine) {
  auto& f = toy();
  std::mt19937_64 rng(3);
  const auto& mc = f.cfg.model;
  const tc::Shape shape{1, mc.latent_frames(), mc.primal_slots, mc.latent_width};
  auto random_z = [&] {
    std::vector<double> v(static_cast<std::size_t>(tc::numel(shape)));
    for (auto& x : v) x = test::normal(rng);
    return TD::constant(shape, v);
  };
  const TD z1 = random_z(), z2 = random_z();
  const double a = 0.7, b = -1.3;
  tc::NoGradGuard guard;
  const auto& ae = f.model.human_ae;
  const TD lhs = ae.latent_to_clip(tc::add(tc::scale(z1, a), tc::scale(z2, b)));
  const TD e1 = ae.latent_to_clip(z1), e2 = ae.latent_to_clip(z2), e0 = ae.latent_to_clip(TD::zeros(shape));
  for (std::int64_t i = 0; i < lhs.numel(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    EXPECT_NEAR(lhs.values()[k], a * e1.values()[k] + b * e2.values()[k] + (1 - a - b) * e0.values()[k], 1e-12);
  }
}

TEST(Model, TextToLatentDecoderIsCausal) {
  auto& f = toy();
  std::mt19937_64 rng(4);
  const auto& mc = f.cfg.model;
  const tc::Shape shape{1, mc.latent_frames(), mc.primal_slots, mc.latent_width};
  std::vector<double> zv(static_cast<std::size_t>(tc::numel(shape)));
  for (auto& x : zv) x = test::normal(rng);
  const std::vector<std::string> caption{"a person walks forward"};
  const TD clip = caption_tensor<double>(*f.ws.embedder, caption);
  tc::NoGradGuard guard;
  const TD base = f.model.human_ae.clip_to_latent(clip, TD::constant(shape, zv));
  const std::int64_t per_window = mc.primal_slots * mc.latent_width;
  for (std::int64_t m = 0; m < mc.latent_frames(); ++m) {
    auto changed = zv;
    for (std::int64_t k = 0; k < per_window; ++k) changed[static_cast<std::size_t>(m * per_window + k)] += 1.0;
    const TD out = f.model.human_ae.clip_to_latent(clip, TD::constant(shape, changed));
    for (std::int64_t w = 0; w < mc.latent_frames(); ++w) {
      double d = 0;
      for (std::int64_t k = 0; k < per_window; ++k) {
        const auto i = static_cast<std::size_t>(w * per_window + k);
        d = std::max(d, std::abs(out.values()[i] - base.values()[i]));
      }
      if (w <= m) {
        EXPECT_EQ(d, 0.0) << "slot " << w << " saw window " << m;
      } else if (w == m + 1) {
        EXPECT_GT(d, 0.0);
      }
    }
  }
}

TEST(Model, MakeBatchRejectsOverlongMotion) {
  auto& f = toy();
  const auto m = MotionSequence::identity(f.ws.human.name(), 40, f.ws.human.joint_count());
  EXPECT_THROW(batch_of({m}, 32), Error);
}

TEST(Model, EveryParameterReceivesGradient) {
  auto& f = toy();
  std::mt19937_64 rng(5);
  std::vector<MotionSequence> hm, am;
  for (int i = 0; i < 2; ++i) {
    hm.push_back(test::smooth_motion(rng, f.ws.human, 20 + 5 * static_cast<std::size_t>(i)));
    am.push_back(test::smooth_motion(rng, f.ws.animal, 18 + 7 * static_cast<std::size_t>(i)));
  }
  const std::vector<std::string> hc{"a person walks forward", "a person jumps up"};
  const std::vector<std::string> ac{"a dog walks forward", "a cat sits down"};
  const std::vector<std::string> sc{"a dog walks forward", "a bear jumps up"};
  const CaptionTensors<double> caps{caption_tensor<double>(*f.ws.embedder, hc),
                                    caption_tensor<double>(*f.ws.embedder, ac),
                                    caption_tensor<double>(*f.ws.embedder, sc)};
  f.model.params.zero_grad();
  const auto loss = total_loss(f.model, batch_of(hm, 32), batch_of(am, 32), caps, f.cfg.loss);
  tc::backward(loss.total);
  for (const auto& p : f.model.params.entries()) {
    double n = 0;
    for (double g : p.tensor.grad()) n += g * g;
    EXPECT_GT(n, 0.0) << p.name;
  }
  f.model.params.zero_grad();
}

TEST(Model, LossGradientsMatchFiniteDifferences) {
  for (const auto& r : gradcheck_losses(test::toy_config(), {})) {
    EXPECT_TRUE(r.passed) << r.name << " error " << r.relative_error;
  }
}

TEST(Model, CrossDomainTermsIgnorePaddingContent) {
  auto& f = toy();
  std::mt19937_64 rng(6);
  std::vector<MotionSequence> hm, am, hm_pad, am_pad;
  for (int i = 0; i < 3; ++i) {
    hm.push_back(test::smooth_motion(rng, f.ws.human, 20 + 3 * static_cast<std::size_t>(i)));
    am.push_back(test::smooth_motion(rng, f.ws.animal, 16 + 4 * static_cast<std::size_t>(i)));
    hm_pad.push_back(with_noisy_padding(hm.back(), 32, rng, f.ws.human));
    am_pad.push_back(with_noisy_padding(am.back(), 30, rng, f.ws.animal));
  }
  const std::vector<std::string> hc{"a person walks", "a person runs", "a person sits down"};
  const std::vector<std::string> ac{"a dog walks", "a cat runs", "a horse sits down"};
  const std::vector<std::string> sc{"a dog walks", "a bear runs", "a cat sits down"};
  const CaptionTensors<double> caps{caption_tensor<double>(*f.ws.embedder, hc),
                                    caption_tensor<double>(*f.ws.embedder, ac),
                                    caption_tensor<double>(*f.ws.embedder, sc)};
  tc::NoGradGuard guard;
  const auto a = total_loss(f.model, batch_of(hm, 32), batch_of(am, 32), caps, f.cfg.loss).report();
  const auto b = total_loss(f.model, batch_of(hm_pad, 32), batch_of(am_pad, 32), caps, f.cfg.loss).report();
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_LE(std::abs(a[i] - b[i]), 1e-9) << TotalLoss<double>::component_names()[i];
  }
}
