#include "omgpt/evaluation.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

#include "omgpt/error.hpp"
#include "omgpt/random.hpp"
#include "omgpt/trainer.hpp"

namespace omgpt {

namespace {

constexpr std::size_t kChunk = 32;

FeatureMatrix to_matrix(const Tensor<float>& t) {
  FeatureMatrix m(t.dim(0), t.dim(1));
  const auto v = t.values();
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<double>(v[static_cast<std::size_t>(i)]);
  return m;
}

}  // namespace

FeatureMatrix extract_features(const OmgptModel<float>& model, const std::vector<const MotionSequence*>& motions,
                               FeatureSide side) {
  tc::NoGradGuard no_grad;
  const auto& head = side == FeatureSide::Animal ? model.animal_ae : model.human_ae;
  FeatureMatrix out(static_cast<Eigen::Index>(motions.size()), model.config.clip_dim);
  for (std::size_t start = 0; start < motions.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, motions.size() - start);
    const MotionBatch batch =
        make_batch(std::span<const MotionSequence* const>(motions.data() + start, n), model.config.max_frames);
    const Tensor<float> z = model.animal_ae.encode(batch_tensor<float>(batch), batch.mask);
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(n)) = to_matrix(head.latent_to_clip(z));
  }
  return out;
}

FeatureMatrix text_features(const EmbeddingProvider& provider, const std::vector<std::string>& captions) {
  FeatureMatrix out(static_cast<Eigen::Index>(captions.size()), static_cast<Eigen::Index>(provider.dimension()));
  for (std::size_t i = 0; i < captions.size(); ++i) {
    const auto e = provider.embed(captions[i]);
    out.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(e.vector.data(), out.cols());
  }
  return out;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json doc;
  for (const auto& [name, s] : metrics) {
    doc[name] = {{"mean", s.mean}, {"std", s.std}, {"runs", s.values.size()}, {"seed0", seed0}, {"values", s.values}};
  }
  doc["protocol"] = {{"mode", mode == EvalMode::InDistribution ? "id" : "ood"},
                     {"captions", captions},
                     {"generations_per_caption", generations_per_caption},
                     {"seed0", seed0}};
  doc["transfer_consistency"] = transfer_consistency;
  return doc.dump(2) + "\n";
}

EvalReport evaluate(const OmgptModel<float>& model, const Dataset& human, const Dataset& animal,
                    const EmbeddingProvider& provider, const EvalConfig& cfg, EvalMode mode) {
  const bool id = mode == EvalMode::InDistribution;
  const auto human_test = human.split(false);
  const auto animal_test = animal.split(false);
  if (human_test.empty() || animal_test.empty()) fail(ErrorCode::DataEmpty, "evaluation needs test motions");
  const std::vector<std::string> species = dataset_species(animal);

  // evaluation captions with the action used to pick source motions
  std::mt19937_64 pick(derive_seed(cfg.seed, {0x63617074ULL}));
  std::vector<std::string> captions;
  std::vector<std::string> actions;
  for (const DatasetEntry* e : id ? animal_test : human_test) {
    const std::string& c = e->captions[uniform_index(pick, e->captions.size())];
    captions.push_back(id ? c : subject_swap(c, species[uniform_index(pick, species.size())]));
    actions.push_back(e->action);
  }
  std::vector<std::size_t> order(captions.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle(order.begin(), order.end(), pick);
  order.resize(std::min(order.size(), static_cast<std::size_t>(cfg.max_captions)));
  std::sort(order.begin(), order.end());

  const auto n = order.size();
  const auto g = static_cast<std::size_t>(cfg.mm_generations);
  if (static_cast<std::size_t>(cfg.pool) > n) {
    fail(ErrorCode::PoolTooLarge, "R-precision pool of " + std::to_string(cfg.pool) + " exceeds " +
                                      std::to_string(n) + " evaluation captions");
  }

  // source human motions per caption, G each
  std::vector<const MotionSequence*> sources;
  std::vector<std::string> requests;
  for (std::size_t i : order) {
    std::vector<const MotionSequence*> match;
    for (const DatasetEntry* e : human_test) {
      if (e->action == actions[i]) match.push_back(&e->motion);
    }
    if (match.empty()) {
      for (const DatasetEntry* e : human.split(true)) {
        if (e->action == actions[i]) match.push_back(&e->motion);
      }
    }
    if (match.empty()) fail(ErrorCode::DataEmpty, "no human motion for action '" + actions[i] + "'");
    std::mt19937_64 rng(derive_seed(cfg.seed, {0x73726373ULL, i}));
    shuffle(match.begin(), match.end(), rng);
    for (std::size_t k = 0; k < g; ++k) {
      sources.push_back(match[k % match.size()]);
      requests.push_back(captions[i]);
    }
  }

  // generation pool and its features
  FeatureMatrix generated(static_cast<Eigen::Index>(n * g), model.config.clip_dim);
  double consistency = 0.0;
  for (std::size_t start = 0; start < sources.size(); start += kChunk) {
    const std::size_t count = std::min(kChunk, sources.size() - start);
    const std::span<const MotionSequence* const> src(sources.data() + start, count);
    const std::span<const std::string> text(requests.data() + start, count);
    const auto motions = transfer_batch(model, provider, src, text);
    std::vector<const MotionSequence*> ptrs;
    for (const auto& m : motions) ptrs.push_back(&m);
    generated.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(count)) =
        extract_features(model, ptrs, cfg.feature_side);

    // consistency of the raw transfer, first generation of each caption only
    std::vector<const MotionSequence*> firsts;
    std::vector<std::string> first_text;
    for (std::size_t k = 0; k < count; ++k) {
      if ((start + k) % g == 0) {
        firsts.push_back(src[k]);
        first_text.push_back(text[k]);
      }
    }
    if (!firsts.empty()) {
      tc::NoGradGuard no_grad;
      const MotionBatch batch = make_batch(firsts, model.config.max_frames);
      const Tensor<float> z = model.human_ae.encode(batch_tensor<float>(batch), batch.mask);
      const Tensor<float> out = transfer(model.animal_ae, z, caption_tensor<float>(provider, first_text), batch.mask);
      consistency += static_cast<double>(loss_cons(model.animal_ae, z, out, batch.mask).item()) *
                     static_cast<double>(firsts.size());
    }
  }

  std::vector<const MotionSequence*> truth;
  for (const DatasetEntry* e : animal_test) truth.push_back(&e->motion);
  const GaussianStats truth_stats = GaussianStats::from_features(extract_features(model, truth, cfg.feature_side));
  std::vector<std::string> eval_captions;
  for (std::size_t i : order) eval_captions.push_back(captions[i]);
  const FeatureMatrix text = text_features(provider, eval_captions);
  std::vector<FeatureMatrix> per_caption;
  for (std::size_t i = 0; i < n; ++i) {
    per_caption.push_back(generated.middleRows(static_cast<Eigen::Index>(i * g), static_cast<Eigen::Index>(g)));
  }

  EvalReport report;
  report.mode = mode;
  report.seed0 = cfg.seed;
  report.captions = n;
  report.generations_per_caption = g;
  report.transfer_consistency = consistency / static_cast<double>(n);
  const int pairs = id ? cfg.diversity_pairs_id : cfg.diversity_pairs_ood;
  auto record = [&](const std::string& name, double v) { report.metrics[name].values.push_back(v); };
  for (int r = 0; r < cfg.runs; ++r) {
    const std::uint64_t seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(r)});
    std::mt19937_64 rng(seed);
    FeatureMatrix pred(static_cast<Eigen::Index>(n), generated.cols());
    for (std::size_t i = 0; i < n; ++i) {
      pred.row(static_cast<Eigen::Index>(i)) = generated.row(static_cast<Eigen::Index>(i * g + uniform_index(rng, g)));
    }
    const auto top = r_precision(pred, text, cfg.pool, derive_seed(seed, {1}));
    record("R_precision_top1", top[0]);
    record("R_precision_top2", top[1]);
    record("R_precision_top3", top[2]);
    record("FID", fid(truth_stats, GaussianStats::from_features(pred)));
    record("MM_Dist", mm_dist(pred, text));
    record("Diversity", diversity(pred, pairs, derive_seed(seed, {2})));
    record("MModality", mmodality(per_caption, cfg.mm_subset, derive_seed(seed, {3})));
  }
  for (auto& [name, s] : report.metrics) {
    const double count = static_cast<double>(s.values.size());
    s.mean = std::accumulate(s.values.begin(), s.values.end(), 0.0) / count;
    double var = 0.0;
    for (double v : s.values) var += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(var / count);
  }
  return report;
}

}  // namespace omgpt
