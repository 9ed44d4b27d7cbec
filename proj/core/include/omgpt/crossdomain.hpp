#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "omgpt/motionae.hpp"
#include "omgpt/textembed.hpp"

namespace omgpt {

struct LossWeights {
  double clip = 1.0;           // lambda_1
  double text_recon = 1.0;     // lambda_2
  double consistency = 0.1;    // lambda_3
  double clip_cross = 1.0;     // lambda_4
  double end_effector = 100.0; // lambda_5
  double translation = 1.0;

  AutoencoderWeights autoencoder() const { return {clip, text_recon, translation}; }
  bool has_cross_terms() const { return consistency != 0.0 || clip_cross != 0.0 || end_effector != 0.0; }
  /// Throws ConfigError on negative weights.
  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

/// Human and animal autoencoders sharing one parameter set and one latent layout.
template <typename T>
struct OmgptModel {
  ModelConfig config;
  SkeletonGraph human;
  SkeletonGraph animal;
  PrimalCorrespondence correspondence;  // map_a: human joints, map_b: animal joints
  tc::ParameterSet<T> params;
  MotionAutoencoder<T> human_ae;
  MotionAutoencoder<T> animal_ae;

  /// Parameters are drawn from a generator seeded with `seed`.
  static OmgptModel create(const ModelConfig& cfg, SkeletonGraph human, SkeletonGraph animal,
                           PrimalCorrespondence corr, std::uint64_t seed);
};

/// World positions of the end effectors from a [B, T, J+1, 6] dynamic tensor,
/// differentiable in the tensor. Returns [B, T, E, 3].
template <typename T>
Tensor<T> effector_positions(const Tensor<T>& dynamic, const SkeletonGraph& graph);

/// Forward differences along frames: [B, T, E, 3] -> [B, T-1, E, 3].
template <typename T>
Tensor<T> effector_velocities(const Tensor<T>& positions);

/// 1 where both frames of a velocity are real; laid out as [B, T-1, E, 3].
template <typename T>
std::vector<T> velocity_weights(std::span<const std::uint8_t> mask, std::int64_t batch, std::int64_t frames,
                                std::int64_t effectors);

/// 1 on latent windows holding at least one real frame; laid out as [B, W, J_p, f_z].
template <typename T>
std::vector<T> latent_weights(std::span<const std::uint8_t> mask, std::int64_t batch, const ModelConfig& cfg);

/// D^a(D_t^a(c_swap, z_h)) with the source motion's frame mask.
template <typename T>
Tensor<T> transfer(const MotionAutoencoder<T>& animal, const Tensor<T>& human_latent, const Tensor<T>& swapped_text,
                   std::span<const std::uint8_t> mask);

/// 1 - cos(E_t^a(z_h), c_swap), averaged over the batch.
template <typename T>
Tensor<T> loss_clip_cross(const MotionAutoencoder<T>& animal, const Tensor<T>& human_latent,
                          const Tensor<T>& swapped_text);

/// MSE between z_h and E^a(generated) over latent windows with real frames.
template <typename T>
Tensor<T> loss_cons(const MotionAutoencoder<T>& animal, const Tensor<T>& human_latent, const Tensor<T>& generated,
                    std::span<const std::uint8_t> mask);

/// MSE between end-effector velocities, matched by end-effector order.
/// Throws EndEffectorCountMismatch.
template <typename T>
Tensor<T> loss_ee(const Tensor<T>& human_dynamic, const SkeletonGraph& human, const Tensor<T>& generated,
                  const SkeletonGraph& animal, std::span<const std::uint8_t> mask);

/// Text conditions for one training step, each [B, clip_dim].
template <typename T>
struct CaptionTensors {
  Tensor<T> human;
  Tensor<T> animal;
  Tensor<T> swapped;  // human captions with the subject replaced by an animal
};

template <typename T>
Tensor<T> caption_tensor(const EmbeddingProvider& provider, std::span<const std::string> captions);

template <typename T>
struct TotalLoss {
  AutoencoderLosses<T> human;
  AutoencoderLosses<T> animal;
  Tensor<T> consistency;
  Tensor<T> clip_cross;
  Tensor<T> end_effector;
  Tensor<T> total;

  /// Column names of the loss history, in order.
  static const std::vector<std::string>& component_names();
  /// Component values in component_names() order.
  std::vector<double> report() const;
};

/// L_ae^h + L_ae^a + lambda_3 L_cons + lambda_4 L_CLIP_x + lambda_5 L_ee.
/// With every cross weight at zero the cross terms are evaluated for the
/// report only and contribute no gradient.
template <typename T>
TotalLoss<T> total_loss(const OmgptModel<T>& model, const MotionBatch& human, const MotionBatch& animal,
                        const CaptionTensors<T>& captions, const LossWeights& weights);

/// Animal motions for each (source human motion, animal caption) pair. Outputs
/// keep the sources' real frames and have orthonormalized rotations.
template <typename T>
std::vector<MotionSequence> transfer_batch(const OmgptModel<T>& model, const EmbeddingProvider& provider,
                                           std::span<const MotionSequence* const> sources,
                                           std::span<const std::string> animal_captions);

/// Animal motions for each (source human motion, caption) pair. Captions are
/// subject-swapped to `animal_name`; outputs keep the sources' real frames and
/// have orthonormalized rotations. Throws SubjectNotFound.
template <typename T>
std::vector<MotionSequence> infer_batch(const OmgptModel<T>& model, const EmbeddingProvider& provider,
                                        std::span<const MotionSequence* const> sources,
                                        std::span<const std::string> captions, const std::string& animal_name);

template <typename T>
MotionSequence infer(const OmgptModel<T>& model, const EmbeddingProvider& provider, const std::string& text,
                     const MotionSequence& source, const std::string& animal_name);

}  // namespace omgpt
