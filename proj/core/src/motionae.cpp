#include "omgpt/motionae.hpp"

#include <algorithm>

#include "omgpt/error.hpp"

namespace omgpt {

void ModelConfig::validate() const {
  const int widths[] = {joint_width, joint_layers,  temporal_width, temporal_layers, temporal_feature,
                        pool,        max_frames,    primal_slots,   latent_width,    clip_dim,
                        caption_width, caption_layers, heads,       ffn_mult};
  for (int w : widths) {
    if (w <= 0) fail(ErrorCode::ConfigError, "model widths, depths and counts must be positive");
  }
  if (max_frames % pool != 0) {
    fail(ErrorCode::ConfigError, "max_frames " + std::to_string(max_frames) + " is not divisible by pool " +
                                     std::to_string(pool));
  }
  for (int w : {joint_width, temporal_width, caption_width}) {
    if (w % heads != 0) {
      fail(ErrorCode::ConfigError, "width " + std::to_string(w) + " is not divisible by " +
                                       std::to_string(heads) + " heads");
    }
  }
}

MotionBatch make_batch(std::span<const MotionSequence* const> motions, std::int64_t frames) {
  MotionBatch b;
  b.batch = static_cast<std::int64_t>(motions.size());
  b.frames = frames;
  if (motions.empty()) return b;
  b.tokens = static_cast<std::int64_t>(motions.front()->joint_count()) + 1;
  const auto per = static_cast<std::size_t>(frames * b.tokens * 6);
  b.dynamic.reserve(per * motions.size());
  b.mask.reserve(static_cast<std::size_t>(frames) * motions.size());
  for (const MotionSequence* m : motions) {
    if (static_cast<std::int64_t>(m->joint_count()) + 1 != b.tokens) {
      fail(ErrorCode::ConfigMismatch, "batch mixes skeletons with different joint counts");
    }
    if (static_cast<std::int64_t>(m->frames()) > frames) {
      fail(ErrorCode::ConfigMismatch, "motion has " + std::to_string(m->frames()) + " frames, limit is " +
                                          std::to_string(frames));
    }
    const MotionSequence padded = pad_motion(*m, static_cast<std::size_t>(frames));
    const auto d = dynamic_tensor(padded);
    b.dynamic.insert(b.dynamic.end(), d.begin(), d.end());
    b.mask.insert(b.mask.end(), padded.mask.begin(), padded.mask.end());
  }
  return b;
}

template <typename T>
Tensor<T> batch_tensor(const MotionBatch& batch) {
  return Tensor<T>::constant({batch.batch, batch.frames, batch.tokens, 6},
                             std::vector<T>(batch.dynamic.begin(), batch.dynamic.end()));
}

template <typename T>
MotionAutoencoder<T>::MotionAutoencoder(tc::ParameterSet<T>& params, const std::string& prefix,
                                        const SkeletonGraph& graph, std::span<const int> primal,
                                        const ModelConfig& cfg, std::mt19937_64& rng)
    : cfg_(cfg), tokens_(static_cast<std::int64_t>(graph.joint_count()) + 1) {
  cfg_.validate();
  if (static_cast<int>(primal.size()) != cfg_.primal_slots) {
    fail(ErrorCode::ConfigMismatch, "correspondence has " + std::to_string(primal.size()) +
                                        " slots, config expects " + std::to_string(cfg_.primal_slots));
  }
  for (int j : primal) {
    if (j < 0 || static_cast<std::size_t>(j) >= graph.joint_count()) {
      fail(ErrorCode::ConfigMismatch, "primal joint index out of range for '" + graph.name() + "'");
    }
    primal_tokens_.push_back(graph.dynamic_row(j));
  }

  const auto n = tokens_;
  std::vector<T> off(static_cast<std::size_t>(n * 3), T(0));
  for (Eigen::Index r = 0; r < graph.offsets().rows(); ++r) {
    for (int c = 0; c < 3; ++c) off[static_cast<std::size_t>((r + 2) * 3 + c)] = static_cast<T>(graph.offsets()(r, c));
  }
  offsets_ = Tensor<T>::constant({n, 3}, std::move(off));
  std::vector<T> base(static_cast<std::size_t>(n * 6), T(0));
  for (std::int64_t r = 0; r < n; ++r) {
    if (r == 1) continue;
    base[static_cast<std::size_t>(r * 6 + 0)] = T(1);
    base[static_cast<std::size_t>(r * 6 + 4)] = T(1);
  }
  output_base_ = Tensor<T>::constant({n, 6}, std::move(base));

  const std::int64_t fj = cfg_.joint_width;
  const std::int64_t ft = cfg_.temporal_feature;
  const std::int64_t fz = cfg_.latent_width;
  const std::int64_t dt = cfg_.temporal_width;
  const std::int64_t dc = cfg_.caption_width;
  const std::int64_t tm = cfg_.max_frames;
  const std::int64_t jp = cfg_.primal_slots;
  const std::int64_t w = cfg_.latent_frames();
  const int h = cfg_.heads;
  const int m = cfg_.ffn_mult;
  const std::string p = prefix + ".";

  pose_in_ = nn::Linear<T>::create(params, p + "enc.pose_in", 9, fj, rng);
  pose_pos_ = nn::positional_table(params, p + "enc.pose_pos", n, fj, rng);
  pose_joints_ = nn::Transformer<T>::create(params, p + "enc.pose_joints", cfg_.joint_layers, fj, h, fj * m, rng);
  offset_in_ = nn::Linear<T>::create(params, p + "enc.offset_in", 3, fj, rng);
  offset_pos_ = nn::positional_table(params, p + "enc.offset_pos", n, fj, rng);
  offset_joints_ =
      nn::Transformer<T>::create(params, p + "enc.offset_joints", cfg_.joint_layers, fj, h, fj * m, rng);
  enc_temporal_in_ = nn::Linear<T>::create(params, p + "enc.temporal_in", n * 2 * fj, dt, rng);
  enc_temporal_pos_ = nn::positional_table(params, p + "enc.temporal_pos", tm, dt, rng);
  enc_temporal_ = nn::Transformer<T>::create(params, p + "enc.temporal", cfg_.temporal_layers, dt, h, dt * m, rng);
  enc_temporal_out_ = nn::Linear<T>::create(params, p + "enc.temporal_out", dt, n * ft, rng);
  to_latent_ = nn::Linear<T>::create(params, p + "enc.to_latent", ft, fz, rng);

  from_latent_ = nn::Linear<T>::create(params, p + "dec.from_latent", fz, ft, rng);
  dec_temporal_in_ = nn::Linear<T>::create(params, p + "dec.temporal_in", n * ft, dt, rng);
  dec_temporal_pos_ = nn::positional_table(params, p + "dec.temporal_pos", tm, dt, rng);
  dec_temporal_ = nn::Transformer<T>::create(params, p + "dec.temporal", cfg_.temporal_layers, dt, h, dt * m, rng);
  dec_temporal_out_ = nn::Linear<T>::create(params, p + "dec.temporal_out", dt, n * fj, rng);
  dec_joint_in_ = nn::Linear<T>::create(params, p + "dec.joint_in", fj + 3, fj, rng);
  dec_joint_pos_ = nn::positional_table(params, p + "dec.joint_pos", n, fj, rng);
  dec_joints_ = nn::Transformer<T>::create(params, p + "dec.joints", cfg_.joint_layers, fj, h, fj * m, rng);
  dec_out_ = nn::Linear<T>::create(params, p + "dec.out", fj, 6, rng);

  clip_head_ = nn::Linear<T>::create(params, p + "text.clip_head", w * jp * fz, cfg_.clip_dim, rng);
  caption_clip_in_ = nn::Linear<T>::create(params, p + "text.clip_in", cfg_.clip_dim, dc, rng);
  caption_latent_in_ = nn::Linear<T>::create(params, p + "text.latent_in", jp * fz, dc, rng);
  caption_pos_ = nn::positional_table(params, p + "text.pos", w + 1, dc, rng);
  caption_decoder_ =
      nn::Transformer<T>::create(params, p + "text.decoder", cfg_.caption_layers, dc, h, dc * m, rng);
  caption_out_ = nn::Linear<T>::create(params, p + "text.out", dc, jp * fz, rng);
}

template <typename T>
void MotionAutoencoder<T>::check_dynamic(const Tensor<T>& dynamic, std::span<const std::uint8_t> mask) const {
  const tc::Shape& s = dynamic.shape();
  if (s.size() != 4 || s[1] != cfg_.max_frames || s[2] != tokens_ || s[3] != 6) {
    fail(ErrorCode::SkeletonMismatch, "dynamic tensor " + tc::to_string(s) + " does not match [B, " +
                                          std::to_string(cfg_.max_frames) + ", " + std::to_string(tokens_) +
                                          ", 6]");
  }
  if (static_cast<std::int64_t>(mask.size()) != s[0] * s[1]) {
    fail(ErrorCode::ConfigMismatch, "mask has " + std::to_string(mask.size()) + " entries for " +
                                        std::to_string(s[0] * s[1]) + " frames");
  }
}

template <typename T>
void MotionAutoencoder<T>::check_latent(const Tensor<T>& z) const {
  const tc::Shape& s = z.shape();
  if (s.size() != 4 || s[1] != cfg_.latent_frames() || s[2] != cfg_.primal_slots || s[3] != cfg_.latent_width) {
    fail(ErrorCode::ConfigMismatch, "latent " + tc::to_string(s) + " does not match [B, " +
                                        std::to_string(cfg_.latent_frames()) + ", " +
                                        std::to_string(cfg_.primal_slots) + ", " +
                                        std::to_string(cfg_.latent_width) + "]");
  }
}

template <typename T>
Tensor<T> MotionAutoencoder<T>::encode(const Tensor<T>& dynamic, std::span<const std::uint8_t> mask,
                                       ActivationBundle<T>* activations) const {
  check_dynamic(dynamic, mask);
  const std::int64_t b = dynamic.dim(0);
  const std::int64_t t = cfg_.max_frames;
  const std::int64_t n = tokens_;
  const std::int64_t fj = cfg_.joint_width;

  const Tensor<T> offsets = tc::reshape(offsets_, {1, n, 3});
  const Tensor<T> pose = tc::concat<T>({tc::reshape(dynamic, {b * t, n, 6}), tc::replicate(offsets, 0, b * t)}, 2);
  const Tensor<T> fj_pose = pose_joints_(tc::add(pose_in_(pose), pose_pos_));
  const Tensor<T> fj_off = offset_joints_(tc::add(offset_in_(offsets), offset_pos_));

  const Tensor<T> frame = tc::reshape(tc::concat<T>({fj_pose, tc::replicate(fj_off, 0, b * t)}, 2), {b, t, n * 2 * fj});
  const Tensor<T> temporal = enc_temporal_(tc::add(enc_temporal_in_(frame), enc_temporal_pos_), false, mask);
  const Tensor<T> ft = enc_temporal_out_(temporal);

  const Tensor<T> tokens = tc::reshape(ft, {b, t, n, cfg_.temporal_feature});
  const Tensor<T> primal = to_latent_(tc::gather(tokens, 2, std::span<const int>(primal_tokens_)));
  Tensor<T> z = tc::window_mean(primal, 1, cfg_.pool, mask);
  if (activations) *activations = {fj_pose, fj_off, ft, z};
  return z;
}

template <typename T>
Tensor<T> MotionAutoencoder<T>::decode(const Tensor<T>& z, std::span<const std::uint8_t> mask) const {
  check_latent(z);
  const std::int64_t b = z.dim(0);
  const std::int64_t t = cfg_.max_frames;
  const std::int64_t n = tokens_;
  if (static_cast<std::int64_t>(mask.size()) != b * t) {
    fail(ErrorCode::ConfigMismatch, "mask has " + std::to_string(mask.size()) + " entries for " +
                                        std::to_string(b * t) + " frames");
  }

  const Tensor<T> unpooled = from_latent_(tc::replicate(z, 1, cfg_.pool));
  const Tensor<T> scattered = tc::scatter_zeros(unpooled, 2, std::span<const int>(primal_tokens_), n);
  const Tensor<T> frame = tc::reshape(scattered, {b, t, n * cfg_.temporal_feature});
  const Tensor<T> temporal = dec_temporal_(tc::add(dec_temporal_in_(frame), dec_temporal_pos_), false, mask);

  const Tensor<T> joints = tc::reshape(dec_temporal_out_(temporal), {b * t, n, cfg_.joint_width});
  const Tensor<T> offsets = tc::replicate(tc::reshape(offsets_, {1, n, 3}), 0, b * t);
  const Tensor<T> h = dec_joints_(tc::add(dec_joint_in_(tc::concat<T>({joints, offsets}, 2)), dec_joint_pos_));
  return tc::add(tc::reshape(dec_out_(h), {b, t, n, 6}), output_base_);
}

template <typename T>
Tensor<T> MotionAutoencoder<T>::latent_to_clip(const Tensor<T>& z) const {
  check_latent(z);
  return clip_head_(tc::reshape(z, {z.dim(0), -1}));
}

template <typename T>
Tensor<T> MotionAutoencoder<T>::clip_to_latent(const Tensor<T>& clip, const Tensor<T>& z) const {
  check_latent(z);
  const std::int64_t b = z.dim(0);
  const std::int64_t w = cfg_.latent_frames();
  const std::int64_t jp = cfg_.primal_slots;
  const std::int64_t fz = cfg_.latent_width;
  if (clip.rank() != 2 || clip.dim(0) != b || clip.dim(1) != cfg_.clip_dim) {
    fail(ErrorCode::ConfigMismatch, "caption embedding " + tc::to_string(clip.shape()) + " does not match [" +
                                        std::to_string(b) + ", " + std::to_string(cfg_.clip_dim) + "]");
  }
  const Tensor<T> c = tc::reshape(caption_clip_in_(clip), {b, 1, cfg_.caption_width});
  const Tensor<T> latent = caption_latent_in_(tc::reshape(z, {b, w, jp * fz}));
  const Tensor<T> seq = tc::add(tc::concat<T>({c, latent}, 1), caption_pos_);
  const Tensor<T> h = tc::slice(caption_decoder_(seq, true), 1, 0, w);
  return tc::reshape(caption_out_(h), {b, w, jp, fz});
}

template <typename T>
std::vector<T> frame_weights(const MotionBatch& batch) {
  const auto per_frame = static_cast<std::size_t>(batch.tokens * 6);
  std::vector<T> w(batch.mask.size() * per_frame);
  for (std::size_t f = 0; f < batch.mask.size(); ++f) {
    std::fill_n(w.begin() + static_cast<std::ptrdiff_t>(f * per_frame), per_frame, batch.mask[f] ? T(1) : T(0));
  }
  return w;
}

template <typename T>
std::vector<T> translation_weights(const MotionBatch& batch) {
  const auto per_frame = static_cast<std::size_t>(batch.tokens * 6);
  std::vector<T> w(batch.mask.size() * per_frame, T(0));
  for (std::size_t f = 0; f < batch.mask.size(); ++f) {
    if (!batch.mask[f]) continue;
    for (std::size_t c = 0; c < 3; ++c) w[f * per_frame + 6 + c] = T(1);
  }
  return w;
}

template <typename T>
Tensor<T> clip_loss(const Tensor<T>& a, const Tensor<T>& b) {
  return tc::mean(tc::add_scalar(tc::scale(tc::cosine_similarity(a, b), T(-1)), T(1)));
}

template <typename T>
AutoencoderLosses<T> autoencoder_losses(const MotionAutoencoder<T>& ae, const MotionBatch& batch,
                                        const Tensor<T>& dynamic, const Tensor<T>& text,
                                        const AutoencoderWeights& weights) {
  const std::vector<T> fw = frame_weights<T>(batch);
  const std::vector<T> tw = translation_weights<T>(batch);
  AutoencoderLosses<T> out;
  out.latent = ae.encode(dynamic, batch.mask);
  const Tensor<T> recon = ae.decode(out.latent, batch.mask);
  const Tensor<T> text_recon = ae.decode(ae.clip_to_latent(text, out.latent), batch.mask);
  out.joint_recon = tc::mse(recon, dynamic, std::span<const T>(fw));
  out.clip = clip_loss(ae.latent_to_clip(out.latent), text);
  out.text_recon = tc::mse(text_recon, dynamic, std::span<const T>(fw));
  out.translation =
      tc::add(tc::mse(recon, dynamic, std::span<const T>(tw)), tc::mse(text_recon, dynamic, std::span<const T>(tw)));
  out.total = tc::add(tc::add(out.joint_recon, tc::scale(out.clip, static_cast<T>(weights.clip))),
                      tc::add(tc::scale(out.text_recon, static_cast<T>(weights.text_recon)),
                              tc::scale(out.translation, static_cast<T>(weights.translation))));
  return out;
}

#define OMGPT_INSTANTIATE_AE(T)                                                                          \
  template Tensor<T> batch_tensor<T>(const MotionBatch&);                                                \
  template class MotionAutoencoder<T>;                                                                   \
  template std::vector<T> frame_weights<T>(const MotionBatch&);                                          \
  template std::vector<T> translation_weights<T>(const MotionBatch&);                                    \
  template Tensor<T> clip_loss<T>(const Tensor<T>&, const Tensor<T>&);                                   \
  template AutoencoderLosses<T> autoencoder_losses<T>(const MotionAutoencoder<T>&, const MotionBatch&,   \
                                                      const Tensor<T>&, const Tensor<T>&,                \
                                                      const AutoencoderWeights&);

OMGPT_INSTANTIATE_AE(float)
OMGPT_INSTANTIATE_AE(double)

}  // namespace omgpt
