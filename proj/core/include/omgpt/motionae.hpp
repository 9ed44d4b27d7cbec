#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "omgpt/layers.hpp"
#include "omgpt/motion.hpp"
#include "omgpt/skeleton.hpp"

namespace omgpt {

using tc::Tensor;

/// Architecture hyper-parameters shared by the human and animal autoencoders.
struct ModelConfig {
  int joint_width = 16;         // f_j
  int joint_layers = 2;
  int temporal_width = 256;
  int temporal_layers = 2;
  int temporal_feature = 16;    // f_t: per-token width of F_t
  int pool = 4;                 // l
  int max_frames = 196;         // T_max
  int primal_slots = 7;         // J_p
  int latent_width = 16;        // f_z
  int clip_dim = 512;
  int caption_width = 256;
  int caption_layers = 4;
  int heads = 4;
  int ffn_mult = 2;

  int latent_frames() const { return max_frames / pool; }
  /// Throws ConfigError.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Padded motions stacked for one forward pass.
struct MotionBatch {
  std::int64_t batch = 0;
  std::int64_t frames = 0;
  std::int64_t tokens = 0;           // J + 1
  std::vector<double> dynamic;       // [batch, frames, tokens, 6]
  std::vector<std::uint8_t> mask;    // [batch, frames]
};

/// Pads every motion to `frames` and stacks the dynamic tensors.
/// Throws ConfigMismatch when a motion is longer than `frames` or joint counts differ.
MotionBatch make_batch(std::span<const MotionSequence* const> motions, std::int64_t frames);

template <typename T>
Tensor<T> batch_tensor(const MotionBatch& batch);

/// Intermediate features of one encode/decode pass.
template <typename T>
struct ActivationBundle {
  Tensor<T> pose_features;      // F_j   [B*T, J+1, f_j]
  Tensor<T> offset_features;    // F_off [1, J+1, f_j]
  Tensor<T> temporal_features;  // F_t   [B, T, (J+1)*f_t]
  Tensor<T> latent;             // Z     [B, T/l, J_p, f_z]
};

/// Skeleton-specific encoder E, decoder D and the latent/text heads E_t, D_t.
/// Parameters live in the ParameterSet passed at construction under `prefix`.
template <typename T>
class MotionAutoencoder {
 public:
  MotionAutoencoder() = default;
  /// `primal` lists this skeleton's joints in correspondence-slot order.
  MotionAutoencoder(tc::ParameterSet<T>& params, const std::string& prefix, const SkeletonGraph& graph,
                    std::span<const int> primal, const ModelConfig& cfg, std::mt19937_64& rng);

  const ModelConfig& config() const { return cfg_; }
  std::int64_t tokens() const { return tokens_; }
  std::span<const int> primal_tokens() const { return primal_tokens_; }

  /// dynamic: [B, T_max, J+1, 6]; mask: B*T_max. Returns Z [B, T_max/l, J_p, f_z].
  Tensor<T> encode(const Tensor<T>& dynamic, std::span<const std::uint8_t> mask,
                   ActivationBundle<T>* activations = nullptr) const;
  /// z: [B, T_max/l, J_p, f_z]. Returns [B, T_max, J+1, 6].
  Tensor<T> decode(const Tensor<T>& z, std::span<const std::uint8_t> mask) const;
  /// E_t: [B, T_max/l, J_p, f_z] -> [B, clip_dim].
  Tensor<T> latent_to_clip(const Tensor<T>& z) const;
  /// D_t: causal decoder over [c, z_0 .. z_{n-1}]; output slot k sees c and z_0 .. z_{k-1}.
  Tensor<T> clip_to_latent(const Tensor<T>& clip, const Tensor<T>& z) const;

 private:
  void check_dynamic(const Tensor<T>& dynamic, std::span<const std::uint8_t> mask) const;
  void check_latent(const Tensor<T>& z) const;

  ModelConfig cfg_;
  std::int64_t tokens_ = 0;
  std::vector<int> primal_tokens_;
  Tensor<T> offsets_;      // [J+1, 3], zero rows for root and translation
  Tensor<T> output_base_;  // [J+1, 6], identity 6D on rotation rows

  nn::Linear<T> pose_in_;
  Tensor<T> pose_pos_;
  nn::Transformer<T> pose_joints_;
  nn::Linear<T> offset_in_;
  Tensor<T> offset_pos_;
  nn::Transformer<T> offset_joints_;
  nn::Linear<T> enc_temporal_in_;
  Tensor<T> enc_temporal_pos_;
  nn::Transformer<T> enc_temporal_;
  nn::Linear<T> enc_temporal_out_;
  nn::Linear<T> to_latent_;

  nn::Linear<T> from_latent_;
  nn::Linear<T> dec_temporal_in_;
  Tensor<T> dec_temporal_pos_;
  nn::Transformer<T> dec_temporal_;
  nn::Linear<T> dec_temporal_out_;
  nn::Linear<T> dec_joint_in_;
  Tensor<T> dec_joint_pos_;
  nn::Transformer<T> dec_joints_;
  nn::Linear<T> dec_out_;

  nn::Linear<T> clip_head_;
  nn::Linear<T> caption_clip_in_;
  nn::Linear<T> caption_latent_in_;
  Tensor<T> caption_pos_;
  nn::Transformer<T> caption_decoder_;
  nn::Linear<T> caption_out_;
};

struct AutoencoderWeights {
  double clip = 1.0;         // lambda_1
  double text_recon = 1.0;   // lambda_2
  double translation = 1.0;
};

/// Per-element weights for a [B, T, J+1, 6] tensor: 1 on real frames.
template <typename T>
std::vector<T> frame_weights(const MotionBatch& batch);
/// As frame_weights() but restricted to the three translation channels of row 1.
template <typename T>
std::vector<T> translation_weights(const MotionBatch& batch);

/// Mean over the batch of 1 - cos(a_i, b_i); a, b: [B, D].
template <typename T>
Tensor<T> clip_loss(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
struct AutoencoderLosses {
  Tensor<T> joint_recon;  // L_jrec
  Tensor<T> clip;         // L_CLIP
  Tensor<T> text_recon;   // L_trec
  Tensor<T> translation;  // L_trans
  Tensor<T> latent;       // Z, for reuse by the cross-domain terms
  Tensor<T> total;
};

/// text: [B, clip_dim] caption embeddings aligned with the batch.
template <typename T>
AutoencoderLosses<T> autoencoder_losses(const MotionAutoencoder<T>& ae, const MotionBatch& batch,
                                        const Tensor<T>& dynamic, const Tensor<T>& text,
                                        const AutoencoderWeights& weights);

}  // namespace omgpt
