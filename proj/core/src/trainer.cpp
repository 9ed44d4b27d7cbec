#include "omgpt/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "omgpt/checkpoint.hpp"
#include "omgpt/error.hpp"
#include "omgpt/random.hpp"

namespace omgpt {

using nlohmann::json;

namespace {

std::shared_ptr<const EmbeddingProvider> make_embedder(const RunConfig& cfg) {
  const auto dim = static_cast<std::size_t>(cfg.model.clip_dim);
  if (!cfg.paths.embedding_table.empty()) {
    return std::make_shared<EmbeddingTable>(EmbeddingTable::load(cfg.paths.embedding_table, dim));
  }
  return std::make_shared<HashEmbedder>(cfg.embed_seed, dim);
}

Workspace load_graphs(const RunConfig& cfg) {
  Workspace ws;
  ws.human = load_skeleton(cfg.paths.human_skeleton);
  ws.animal = load_skeleton(cfg.paths.animal_skeleton);
  const auto slots = load_semantic_map(cfg.paths.correspondence);
  ws.correspondence = intersect_primal(ws.human, ws.animal, slots);
  ws.embedder = make_embedder(cfg);
  return ws;
}

Dataset data_or_synth(const std::filesystem::path& dir, const DatasetSpec& spec, const SkeletonGraph& g) {
  const FrameRange limit = spec.kind == SubjectKind::Human ? kHumanFrames : kAnimalFrames;
  Dataset ds = dir.empty() ? generate(spec, g) : load_dataset(dir, g, limit);
  if (ds.entries.empty()) fail(ErrorCode::DataEmpty, "dataset for '" + g.name() + "' is empty");
  return ds;
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

Workspace Workspace::load(const RunConfig& cfg) {
  Workspace ws = load_graphs(cfg);
  ws.human_data = data_or_synth(cfg.paths.human_data, cfg.human_data, ws.human);
  ws.animal_data = data_or_synth(cfg.paths.animal_data, cfg.animal_data, ws.animal);
  return ws;
}

Workspace Workspace::skeletons(const RunConfig& cfg) { return load_graphs(cfg); }

Workspace Workspace::load(const RunConfig& cfg, const std::filesystem::path& dataset_dir) {
  Workspace ws = load_graphs(cfg);
  ws.human_data = data_or_synth(dataset_dir / "human", cfg.human_data, ws.human);
  ws.animal_data = data_or_synth(dataset_dir / "animal", cfg.animal_data, ws.animal);
  return ws;
}

std::vector<std::string> dataset_species(const Dataset& animal) {
  std::set<std::string> names;
  for (const auto& e : animal.entries) names.insert(e.subject);
  return {names.begin(), names.end()};
}

std::string loss_csv_header() {
  std::string h = "step";
  for (const auto& n : TotalLoss<float>::component_names()) h += "," + n;
  return h;
}

Trainer::Trainer(RunConfig cfg, const Workspace& ws)
    : cfg_(std::move(cfg)),
      ws_(&ws),
      model_(OmgptModel<float>::create(cfg_.model, ws.human, ws.animal, ws.correspondence, cfg_.train.seed)),
      adam_(model_.params, cfg_.train.adam),
      ema_(model_.params, cfg_.train.ema_decay) {
  human_train_ = ws.human_data.split(true);
  animal_train_ = ws.animal_data.split(true);
  if (human_train_.empty() || animal_train_.empty()) fail(ErrorCode::DataEmpty, "no training motions");
  species_ = dataset_species(ws.animal_data);
}

std::vector<double> Trainer::step() {
  const auto b = static_cast<std::size_t>(cfg_.train.batch_size);
  std::mt19937_64 rng(derive_seed(cfg_.train.seed, {static_cast<std::uint64_t>(steps_done_)}));

  std::vector<const MotionSequence*> human_motions, animal_motions;
  std::vector<std::string> human_captions, animal_captions, swapped;
  for (std::size_t i = 0; i < b; ++i) {
    const DatasetEntry* e = human_train_[uniform_index(rng, human_train_.size())];
    human_motions.push_back(&e->motion);
    human_captions.push_back(e->captions[uniform_index(rng, e->captions.size())]);
    swapped.push_back(subject_swap(human_captions.back(), species_[uniform_index(rng, species_.size())]));
  }
  for (std::size_t i = 0; i < b; ++i) {
    const DatasetEntry* e = animal_train_[uniform_index(rng, animal_train_.size())];
    animal_motions.push_back(&e->motion);
    animal_captions.push_back(e->captions[uniform_index(rng, e->captions.size())]);
  }

  const auto frames = static_cast<std::int64_t>(cfg_.model.max_frames);
  const MotionBatch human = make_batch(human_motions, frames);
  const MotionBatch animal = make_batch(animal_motions, frames);
  const EmbeddingProvider& text = *ws_->embedder;
  const CaptionTensors<float> captions{caption_tensor<float>(text, human_captions),
                                       caption_tensor<float>(text, animal_captions),
                                       caption_tensor<float>(text, swapped)};

  model_.params.zero_grad();
  const TotalLoss<float> loss = total_loss(model_, human, animal, captions, cfg_.loss);
  std::vector<double> report = loss.report();
  const auto& names = TotalLoss<float>::component_names();
  for (std::size_t i = 0; i < report.size(); ++i) {
    if (!std::isfinite(report[i])) {
      fail(ErrorCode::NanLoss, names[i] + " = " + fmt(report[i]) + " at step " + std::to_string(steps_done_));
    }
  }
  tc::backward(loss.total);
  if (cfg_.train.clip_norm > 0.0) model_.params.clip_grad_norm(cfg_.train.clip_norm);
  tc::adam_step(model_.params, adam_);
  tc::ema_update(model_.params, ema_);
  ++steps_done_;
  return report;
}

void Trainer::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::vector<NamedArray> arrays = model_.params.export_arrays("param.");
  for (auto& a : adam_.export_arrays()) arrays.push_back(std::move(a));
  for (auto& a : ema_.export_arrays()) arrays.push_back(std::move(a));
  write_checkpoint(dir / kCheckpointFile, arrays);

  json state;
  state["format"] = 1;
  state["step"] = steps_done_;
  state["adam_step"] = adam_.step;
  state["config"] = render_config(cfg_);
  const auto tmp = dir / (std::string(kStateFile) + ".tmp");
  {
    std::ofstream out(tmp);
    if (!out) fail(ErrorCode::ParseError, "cannot write " + tmp.string());
    out << state.dump(1) << '\n';
  }
  std::filesystem::rename(tmp, dir / kStateFile);
}

namespace {

json read_state(const std::filesystem::path& dir) {
  const auto path = dir / kStateFile;
  std::ifstream in(path);
  if (!in) fail(ErrorCode::CheckpointMissing, "no checkpoint state at " + path.string());
  try {
    json state = json::parse(in);
    if (state.at("format").get<int>() != 1) fail(ErrorCode::VersionMismatch, path.string() + ": unsupported format");
    return state;
  } catch (const json::exception& e) {
    fail(ErrorCode::VersionMismatch, path.string() + ": " + e.what());
  }
}

}  // namespace

RunConfig checkpoint_config(const std::filesystem::path& checkpoint_dir) {
  const json state = read_state(checkpoint_dir);
  return resolve_config(ConfigFile::parse(state.at("config").get<std::string>(), (checkpoint_dir / kStateFile).string()));
}

Trainer Trainer::resume(const std::filesystem::path& checkpoint_dir, RunConfig cfg, const Workspace& ws) {
  const json state = read_state(checkpoint_dir);
  const RunConfig saved = checkpoint_config(checkpoint_dir);
  if (saved.train.batch_size != cfg.train.batch_size) {
    std::cerr << "resume: batch_size " << cfg.train.batch_size << " (checkpoint trained with "
              << saved.train.batch_size << ")\n";
  }
  const auto arrays = read_checkpoint(checkpoint_dir / kCheckpointFile);
  Trainer t(std::move(cfg), ws);
  t.model_.params.import_arrays(arrays, "param.");
  t.adam_.import_arrays(arrays);
  t.ema_.import_arrays(arrays);
  t.adam_.step = state.at("adam_step").get<std::int64_t>();
  t.steps_done_ = state.at("step").get<std::int64_t>();
  return t;
}

void Trainer::run(const std::filesystem::path& out,
                  const std::function<void(std::int64_t, const std::vector<double>&)>& on_step) {
  std::filesystem::create_directories(out);
  {
    std::ofstream echo(out / kConfigEcho);
    echo << render_config(cfg_);
  }

  // Keep history rows for steps already in the parameters; drop any written
  // after the checkpoint being resumed.
  const auto csv_path = out / kLossFile;
  std::vector<std::string> kept;
  if (steps_done_ > 0) {
    std::ifstream in(csv_path);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::int64_t step = -1;
      std::from_chars(line.data(), line.data() + line.size(), step);
      if (step >= 0 && step < steps_done_) kept.push_back(line);
    }
  }
  {
    std::ofstream csv(csv_path, std::ios::trunc);
    csv << loss_csv_header() << '\n';
    for (const auto& l : kept) csv << l << '\n';
  }

  std::ofstream csv(csv_path, std::ios::app);
  while (steps_done_ < cfg_.train.steps) {
    const std::int64_t k = steps_done_;
    const std::vector<double> report = step();
    csv << k;
    for (double v : report) csv << ',' << fmt(v);
    csv << '\n';
    csv.flush();
    if (on_step) on_step(k, report);
    if (steps_done_ % cfg_.train.checkpoint_interval == 0 || steps_done_ == cfg_.train.steps) {
      save(out / "checkpoint");
    }
  }
}

OmgptModel<float> load_model(const std::filesystem::path& checkpoint_dir, const RunConfig& cfg, const Workspace& ws,
                             bool use_ema) {
  read_state(checkpoint_dir);
  const auto arrays = read_checkpoint(checkpoint_dir / kCheckpointFile);
  OmgptModel<float> model = OmgptModel<float>::create(cfg.model, ws.human, ws.animal, ws.correspondence, cfg.train.seed);
  model.params.import_arrays(arrays, "param.");
  if (use_ema) {
    tc::EmaState<float> ema(model.params, cfg.train.ema_decay);
    ema.import_arrays(arrays);
    tc::ema_swap(model.params, ema);
  }
  return model;
}

}  // namespace omgpt
