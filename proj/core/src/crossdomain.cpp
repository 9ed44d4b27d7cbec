#include "omgpt/crossdomain.hpp"

#include <optional>
#include <random>

#include "omgpt/error.hpp"

namespace omgpt {

void LossWeights::validate() const {
  for (double w : {clip, text_recon, consistency, clip_cross, end_effector, translation}) {
    if (!(w >= 0.0)) fail(ErrorCode::ConfigError, "loss weights must be non-negative");
  }
}

template <typename T>
OmgptModel<T> OmgptModel<T>::create(const ModelConfig& cfg, SkeletonGraph human, SkeletonGraph animal,
                                    PrimalCorrespondence corr, std::uint64_t seed) {
  OmgptModel m;
  m.config = cfg;
  m.human = std::move(human);
  m.animal = std::move(animal);
  m.correspondence = std::move(corr);
  std::mt19937_64 rng(seed);
  m.human_ae = MotionAutoencoder<T>(m.params, "human", m.human, m.correspondence.map_a, cfg, rng);
  m.animal_ae = MotionAutoencoder<T>(m.params, "animal", m.animal, m.correspondence.map_b, cfg, rng);
  return m;
}

template <typename T>
Tensor<T> effector_positions(const Tensor<T>& dynamic, const SkeletonGraph& graph) {
  const std::int64_t b = dynamic.dim(0);
  const std::int64_t t = dynamic.dim(1);
  const auto joints = graph.joint_count();
  if (dynamic.rank() != 4 || dynamic.dim(2) != static_cast<std::int64_t>(joints) + 1 || dynamic.dim(3) != 6) {
    fail(ErrorCode::SkeletonMismatch, "dynamic tensor " + tc::to_string(dynamic.shape()) + " does not fit '" +
                                          graph.name() + "'");
  }

  // needs_position: on a path to an end effector; needs_world: strict ancestor of one.
  std::vector<char> needs_position(joints, 0);
  std::vector<char> needs_world(joints, 0);
  for (int e : graph.end_effector_ids()) {
    needs_position[static_cast<std::size_t>(e)] = 1;
    for (int p = graph.parent(e); p != kNoParent; p = graph.parent(p)) {
      needs_position[static_cast<std::size_t>(p)] = 1;
      needs_world[static_cast<std::size_t>(p)] = 1;
    }
  }

  std::vector<int> rows(joints);
  for (std::size_t j = 0; j < joints; ++j) rows[j] = graph.dynamic_row(static_cast<int>(j));
  const Tensor<T> local = tc::rot6d_to_matrix(tc::gather(dynamic, 2, std::span<const int>(rows)));
  auto local_of = [&](int j) { return tc::reshape(tc::slice(local, 2, j, 1), {b, t, 3, 3}); };

  std::vector<Tensor<T>> world(joints);
  std::vector<Tensor<T>> position(joints);
  const int root = graph.root();
  position[static_cast<std::size_t>(root)] = tc::reshape(tc::slice(tc::slice(dynamic, 2, 1, 1), 3, 0, 3), {b, t, 3});
  world[static_cast<std::size_t>(root)] = local_of(root);
  for (int j : graph.topological_order()) {
    const auto ju = static_cast<std::size_t>(j);
    if (j == root || !needs_position[ju]) continue;
    const auto pu = static_cast<std::size_t>(graph.parent(j));
    const Eigen::Vector3d off = graph.offset(j);
    const Tensor<T> offset = Tensor<T>::constant(
        {3, 1}, {static_cast<T>(off.x()), static_cast<T>(off.y()), static_cast<T>(off.z())});
    position[ju] = tc::add(position[pu], tc::reshape(tc::matmul(world[pu], offset), {b, t, 3}));
    if (needs_world[ju]) world[ju] = tc::matmul(world[pu], local_of(j));
  }

  std::vector<Tensor<T>> effectors;
  for (int e : graph.end_effector_ids()) {
    effectors.push_back(tc::reshape(position[static_cast<std::size_t>(e)], {b, t, 1, 3}));
  }
  return tc::concat(effectors, 2);
}

template <typename T>
Tensor<T> effector_velocities(const Tensor<T>& positions) {
  const std::int64_t t = positions.dim(1);
  if (t < 2) fail(ErrorCode::TooFewFrames, "velocities need at least two frames");
  return tc::sub(tc::slice(positions, 1, 1, t - 1), tc::slice(positions, 1, 0, t - 1));
}

template <typename T>
std::vector<T> velocity_weights(std::span<const std::uint8_t> mask, std::int64_t batch, std::int64_t frames,
                                std::int64_t effectors) {
  const auto per = static_cast<std::size_t>(effectors * 3);
  std::vector<T> w;
  w.reserve(static_cast<std::size_t>(batch * (frames - 1)) * per);
  for (std::int64_t i = 0; i < batch; ++i) {
    for (std::int64_t f = 0; f + 1 < frames; ++f) {
      const bool real = mask[static_cast<std::size_t>(i * frames + f)] && mask[static_cast<std::size_t>(i * frames + f + 1)];
      w.insert(w.end(), per, real ? T(1) : T(0));
    }
  }
  return w;
}

template <typename T>
std::vector<T> latent_weights(std::span<const std::uint8_t> mask, std::int64_t batch, const ModelConfig& cfg) {
  const std::int64_t windows = cfg.latent_frames();
  const auto per = static_cast<std::size_t>(cfg.primal_slots * cfg.latent_width);
  std::vector<T> w;
  w.reserve(static_cast<std::size_t>(batch * windows) * per);
  for (std::int64_t i = 0; i < batch; ++i) {
    for (std::int64_t k = 0; k < windows; ++k) {
      bool any = false;
      for (std::int64_t f = k * cfg.pool; f < (k + 1) * cfg.pool; ++f) {
        any = any || mask[static_cast<std::size_t>(i * cfg.max_frames + f)];
      }
      w.insert(w.end(), per, any ? T(1) : T(0));
    }
  }
  return w;
}

template <typename T>
Tensor<T> transfer(const MotionAutoencoder<T>& animal, const Tensor<T>& human_latent, const Tensor<T>& swapped_text,
                   std::span<const std::uint8_t> mask) {
  return animal.decode(animal.clip_to_latent(swapped_text, human_latent), mask);
}

template <typename T>
Tensor<T> loss_clip_cross(const MotionAutoencoder<T>& animal, const Tensor<T>& human_latent,
                          const Tensor<T>& swapped_text) {
  return clip_loss(animal.latent_to_clip(human_latent), swapped_text);
}

template <typename T>
Tensor<T> loss_cons(const MotionAutoencoder<T>& animal, const Tensor<T>& human_latent, const Tensor<T>& generated,
                    std::span<const std::uint8_t> mask) {
  const std::vector<T> w = latent_weights<T>(mask, human_latent.dim(0), animal.config());
  return tc::mse(human_latent, animal.encode(generated, mask), std::span<const T>(w));
}

template <typename T>
Tensor<T> loss_ee(const Tensor<T>& human_dynamic, const SkeletonGraph& human, const Tensor<T>& generated,
                  const SkeletonGraph& animal, std::span<const std::uint8_t> mask) {
  const auto effectors = human.end_effector_ids().size();
  if (effectors != animal.end_effector_ids().size()) {
    fail(ErrorCode::EndEffectorCountMismatch, "'" + human.name() + "' has " + std::to_string(effectors) +
                                                  " end effectors, '" + animal.name() + "' has " +
                                                  std::to_string(animal.end_effector_ids().size()));
  }
  const Tensor<T> target = effector_velocities(effector_positions(human_dynamic, human));
  const Tensor<T> moved = effector_velocities(effector_positions(generated, animal));
  const std::vector<T> w = velocity_weights<T>(mask, human_dynamic.dim(0), human_dynamic.dim(1),
                                               static_cast<std::int64_t>(effectors));
  return tc::mse(moved, target, std::span<const T>(w));
}

template <typename T>
Tensor<T> caption_tensor(const EmbeddingProvider& provider, std::span<const std::string> captions) {
  const auto dim = provider.dimension();
  std::vector<T> values;
  values.reserve(captions.size() * dim);
  for (const auto& c : captions) {
    const TextEmbedding e = provider.embed(c);
    for (double v : e.vector) values.push_back(static_cast<T>(v));
  }
  return Tensor<T>::constant({static_cast<std::int64_t>(captions.size()), static_cast<std::int64_t>(dim)},
                             std::move(values));
}

template <typename T>
const std::vector<std::string>& TotalLoss<T>::component_names() {
  static const std::vector<std::string> names = {"L_jrec_h", "L_CLIP_h", "L_trec_h", "L_trans_h", "L_jrec_a",
                                                 "L_CLIP_a", "L_trec_a", "L_trans_a", "L_cons",   "L_CLIP_x",
                                                 "L_ee",     "L_total"};
  return names;
}

template <typename T>
std::vector<double> TotalLoss<T>::report() const {
  const Tensor<T>* parts[] = {&human.joint_recon,  &human.clip,  &human.text_recon,  &human.translation,
                              &animal.joint_recon, &animal.clip, &animal.text_recon, &animal.translation,
                              &consistency,        &clip_cross,  &end_effector,      &total};
  std::vector<double> out;
  for (const Tensor<T>* p : parts) out.push_back(static_cast<double>(p->item()));
  return out;
}

template <typename T>
TotalLoss<T> total_loss(const OmgptModel<T>& model, const MotionBatch& human, const MotionBatch& animal,
                        const CaptionTensors<T>& captions, const LossWeights& weights) {
  TotalLoss<T> out;
  const Tensor<T> human_dyn = batch_tensor<T>(human);
  const Tensor<T> animal_dyn = batch_tensor<T>(animal);
  const AutoencoderWeights ae = weights.autoencoder();
  out.human = autoencoder_losses(model.human_ae, human, human_dyn, captions.human, ae);
  out.animal = autoencoder_losses(model.animal_ae, animal, animal_dyn, captions.animal, ae);

  {
    std::optional<tc::NoGradGuard> report_only;
    if (!weights.has_cross_terms()) report_only.emplace();
    const Tensor<T>& z = out.human.latent;
    const Tensor<T> generated = transfer(model.animal_ae, z, captions.swapped, human.mask);
    out.consistency = loss_cons(model.animal_ae, z, generated, human.mask);
    out.clip_cross = loss_clip_cross(model.animal_ae, z, captions.swapped);
    out.end_effector = loss_ee(human_dyn, model.human, generated, model.animal, human.mask);
  }

  Tensor<T> total = tc::add(out.human.total, out.animal.total);
  if (weights.has_cross_terms()) {
    total = tc::add(total, tc::add(tc::scale(out.consistency, static_cast<T>(weights.consistency)),
                                   tc::add(tc::scale(out.clip_cross, static_cast<T>(weights.clip_cross)),
                                           tc::scale(out.end_effector, static_cast<T>(weights.end_effector)))));
  }
  out.total = total;
  return out;
}

template <typename T>
std::vector<MotionSequence> transfer_batch(const OmgptModel<T>& model, const EmbeddingProvider& provider,
                                           std::span<const MotionSequence* const> sources,
                                           std::span<const std::string> animal_captions) {
  if (sources.size() != animal_captions.size()) {
    fail(ErrorCode::LengthMismatch, std::to_string(sources.size()) + " sources for " +
                                        std::to_string(animal_captions.size()) + " captions");
  }
  tc::NoGradGuard no_grad;
  const MotionBatch batch = make_batch(sources, model.config.max_frames);
  const Tensor<T> z = model.human_ae.encode(batch_tensor<T>(batch), batch.mask);
  const Tensor<T> text = caption_tensor<T>(provider, animal_captions);
  const Tensor<T> generated = transfer(model.animal_ae, z, text, batch.mask);

  const auto frames = static_cast<std::size_t>(batch.frames);
  const std::size_t joints = model.animal.joint_count();
  const std::size_t per = frames * (joints + 1) * 6;
  std::vector<MotionSequence> out;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto values = generated.values().subspan(i * per, per);
    const std::vector<double> dyn(values.begin(), values.end());
    const auto real = static_cast<Eigen::Index>(sources[i]->real_frames());
    const MotionSequence full = motion_from_dynamic(dyn, frames, joints, model.animal.name(), animal_captions[i],
                                                    std::vector<std::uint8_t>(frames, 1));
    MotionSequence m;
    m.skeleton = full.skeleton;
    m.caption = full.caption;
    m.global_rotation = full.global_rotation.topRows(real);
    m.global_translation = full.global_translation.topRows(real);
    m.joint_rotations = full.joint_rotations.topRows(real);
    m.mask.assign(static_cast<std::size_t>(real), 1);
    out.push_back(orthonormalized(m));
  }
  return out;
}

template <typename T>
std::vector<MotionSequence> infer_batch(const OmgptModel<T>& model, const EmbeddingProvider& provider,
                                        std::span<const MotionSequence* const> sources,
                                        std::span<const std::string> captions, const std::string& animal_name) {
  std::vector<std::string> swapped;
  for (const auto& c : captions) swapped.push_back(subject_swap(c, animal_name));
  return transfer_batch(model, provider, sources, swapped);
}

template <typename T>
MotionSequence infer(const OmgptModel<T>& model, const EmbeddingProvider& provider, const std::string& text,
                     const MotionSequence& source, const std::string& animal_name) {
  const MotionSequence* sources[] = {&source};
  const std::string captions[] = {text};
  return infer_batch(model, provider, sources, captions, animal_name).front();
}

#define OMGPT_INSTANTIATE_CROSS(T)                                                                              \
  template struct OmgptModel<T>;                                                                                \
  template struct TotalLoss<T>;                                                                                 \
  template Tensor<T> effector_positions<T>(const Tensor<T>&, const SkeletonGraph&);                             \
  template Tensor<T> effector_velocities<T>(const Tensor<T>&);                                                  \
  template std::vector<T> velocity_weights<T>(std::span<const std::uint8_t>, std::int64_t, std::int64_t,        \
                                              std::int64_t);                                                    \
  template std::vector<T> latent_weights<T>(std::span<const std::uint8_t>, std::int64_t, const ModelConfig&);   \
  template Tensor<T> transfer<T>(const MotionAutoencoder<T>&, const Tensor<T>&, const Tensor<T>&,               \
                                 std::span<const std::uint8_t>);                                                \
  template Tensor<T> loss_clip_cross<T>(const MotionAutoencoder<T>&, const Tensor<T>&, const Tensor<T>&);       \
  template Tensor<T> loss_cons<T>(const MotionAutoencoder<T>&, const Tensor<T>&, const Tensor<T>&,              \
                                  std::span<const std::uint8_t>);                                               \
  template Tensor<T> loss_ee<T>(const Tensor<T>&, const SkeletonGraph&, const Tensor<T>&, const SkeletonGraph&, \
                                std::span<const std::uint8_t>);                                                 \
  template Tensor<T> caption_tensor<T>(const EmbeddingProvider&, std::span<const std::string>);                 \
  template TotalLoss<T> total_loss<T>(const OmgptModel<T>&, const MotionBatch&, const MotionBatch&,             \
                                      const CaptionTensors<T>&, const LossWeights&);                            \
  template std::vector<MotionSequence> transfer_batch<T>(const OmgptModel<T>&, const EmbeddingProvider&,        \
                                                         std::span<const MotionSequence* const>,                \
                                                         std::span<const std::string>);                         \
  template std::vector<MotionSequence> infer_batch<T>(const OmgptModel<T>&, const EmbeddingProvider&,           \
                                                      std::span<const MotionSequence* const>,                   \
                                                      std::span<const std::string>, const std::string&);        \
  template MotionSequence infer<T>(const OmgptModel<T>&, const EmbeddingProvider&, const std::string&,          \
                                   const MotionSequence&, const std::string&);

OMGPT_INSTANTIATE_CROSS(float)
OMGPT_INSTANTIATE_CROSS(double)

}  // namespace omgpt
