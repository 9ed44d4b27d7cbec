#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "omgpt/config.hpp"
#include "omgpt/crossdomain.hpp"
#include "omgpt/datagen.hpp"
#include "omgpt/optim.hpp"
#include "omgpt/textembed.hpp"

namespace omgpt {

/// Skeletons, correspondence, datasets and caption embedder named by a RunConfig.
struct Workspace {
  SkeletonGraph human;
  SkeletonGraph animal;
  PrimalCorrespondence correspondence;
  Dataset human_data;
  Dataset animal_data;
  std::shared_ptr<const EmbeddingProvider> embedder;

  /// Datasets come from the configured directories, or are synthesized from
  /// the dataset specs when no directory is set.
  static Workspace load(const RunConfig& cfg);
  /// Skeletons, correspondence and embedder only; both datasets stay empty.
  static Workspace skeletons(const RunConfig& cfg);
  /// As load(), but with datasets read from `<dataset_dir>/human` and `<dataset_dir>/animal`.
  static Workspace load(const RunConfig& cfg, const std::filesystem::path& dataset_dir);
};

/// Animal species named in an animal dataset, sorted.
std::vector<std::string> dataset_species(const Dataset& animal);

inline constexpr const char* kCheckpointFile = "checkpoint.bin";
inline constexpr const char* kStateFile = "state.json";
inline constexpr const char* kLossFile = "losses.csv";
inline constexpr const char* kConfigEcho = "config.cfg";

std::string loss_csv_header();

/// Joint optimisation of both autoencoders and the cross-domain objective.
///
/// Step k draws its batches from a generator seeded by (seed, k), so a resumed
/// run replays exactly the batches an uninterrupted run would see.
class Trainer {
 public:
  Trainer(RunConfig cfg, const Workspace& ws);
  /// Restores parameters, Adam moments, EMA shadows and the step counter.
  /// Throws CheckpointMissing, VersionMismatch or StateMismatch.
  static Trainer resume(const std::filesystem::path& checkpoint_dir, RunConfig cfg, const Workspace& ws);

  /// One optimiser step; returns the loss report of the pre-update parameters.
  /// Throws NanLoss naming the first non-finite component.
  std::vector<double> step();
  /// Runs until `config().train.steps` steps are done, appending to
  /// `<out>/losses.csv` and writing `<out>/checkpoint` every checkpoint_interval
  /// steps and at the end.
  void run(const std::filesystem::path& out,
           const std::function<void(std::int64_t, const std::vector<double>&)>& on_step = {});
  void save(const std::filesystem::path& dir) const;

  std::int64_t steps_done() const { return steps_done_; }
  const RunConfig& config() const { return cfg_; }
  OmgptModel<float>& model() { return model_; }
  const OmgptModel<float>& model() const { return model_; }
  const tc::AdamState<float>& adam() const { return adam_; }
  const tc::EmaState<float>& ema() const { return ema_; }

 private:
  RunConfig cfg_;
  const Workspace* ws_;
  OmgptModel<float> model_;
  tc::AdamState<float> adam_;
  tc::EmaState<float> ema_;
  std::int64_t steps_done_ = 0;
  std::vector<const DatasetEntry*> human_train_;
  std::vector<const DatasetEntry*> animal_train_;
  std::vector<std::string> species_;
};

/// Model parameters from a checkpoint directory; `use_ema` selects the EMA
/// shadows instead of the live weights. Throws CheckpointMissing or VersionMismatch.
OmgptModel<float> load_model(const std::filesystem::path& checkpoint_dir, const RunConfig& cfg, const Workspace& ws,
                             bool use_ema);
/// The resolved configuration stored alongside a checkpoint.
RunConfig checkpoint_config(const std::filesystem::path& checkpoint_dir);

}  // namespace omgpt
