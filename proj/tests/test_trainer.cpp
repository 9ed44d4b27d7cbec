#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "omgpt/checkpoint.hpp"
#include "omgpt/error.hpp"
#include "omgpt/evaluation.hpp"
#include "omgpt/trainer.hpp"
#include "support.hpp"

using namespace omgpt;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Shared {
  RunConfig cfg = [] {
    RunConfig c = test::toy_config();
    c.train.steps = 6;
    c.train.checkpoint_interval = 3;
    c.train.batch_size = 4;
    return c;
  }();
  Workspace ws = Workspace::load(cfg);
};

Shared& shared() {
  static Shared s;
  return s;
}

}  // namespace

TEST(Trainer, ResumeReplaysTheUninterruptedRun) {
  auto& s = shared();
  const auto full = test::scratch_dir("trainer_full");
  const auto part = test::scratch_dir("trainer_part");
  Trainer a(s.cfg, s.ws);
  a.run(full);

  RunConfig short_cfg = s.cfg;
  short_cfg.train.steps = 3;
  Trainer b(short_cfg, s.ws);
  b.run(part);
  Trainer c = Trainer::resume(part / "checkpoint", s.cfg, s.ws);
  EXPECT_EQ(c.steps_done(), 3);
  c.run(part);

  EXPECT_EQ(slurp(full / "checkpoint" / kCheckpointFile), slurp(part / "checkpoint" / kCheckpointFile));
  EXPECT_EQ(slurp(full / kLossFile), slurp(part / kLossFile));
}

TEST(Trainer, LossCsvHasOneRowPerStep) {
  auto& s = shared();
  const auto dir = test::scratch_dir("trainer_csv");
  Trainer t(s.cfg, s.ws);
  t.run(dir);
  std::ifstream in(dir / kLossFile);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, loss_csv_header());
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, s.cfg.train.steps);
  EXPECT_TRUE(fs::exists(dir / kConfigEcho));
  EXPECT_TRUE(resolve_config(ConfigFile::load(dir / kConfigEcho)) == s.cfg);
  EXPECT_TRUE(checkpoint_config(dir / "checkpoint") == s.cfg);
}

TEST(Trainer, EmaModelDiffersFromLiveWeights) {
  auto& s = shared();
  const auto dir = test::scratch_dir("trainer_ema");
  Trainer t(s.cfg, s.ws);
  t.run(dir);
  const auto live = load_model(dir / "checkpoint", s.cfg, s.ws, false);
  const auto ema = load_model(dir / "checkpoint", s.cfg, s.ws, true);
  const auto& name = live.params.entries().front().name;
  const auto lv = live.params.get(name).values();
  const auto ev = ema.params.get(name).values();
  const auto tv = t.model().params.get(name).values();
  EXPECT_TRUE(std::equal(lv.begin(), lv.end(), tv.begin()));
  EXPECT_FALSE(std::equal(lv.begin(), lv.end(), ev.begin()));
  const auto& shadow = t.ema().shadow.front();
  EXPECT_TRUE(std::equal(ev.begin(), ev.end(), shadow.begin()));
}

TEST(Trainer, MissingCheckpointIsReported) {
  auto& s = shared();
  try {
    Trainer::resume(test::scratch_dir("trainer_missing"), s.cfg, s.ws);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CheckpointMissing);
  }
}

TEST(Evaluation, ReportsEveryMetricPerRun) {
  auto& s = shared();
  const auto model = OmgptModel<float>::create(s.cfg.model, s.ws.human, s.ws.animal, s.ws.correspondence, 1);
  EvalConfig ec = s.cfg.eval;
  ec.runs = 3;
  ec.mm_generations = 5;
  for (auto mode : {EvalMode::InDistribution, EvalMode::OutOfDistribution}) {
    const auto r = evaluate(model, s.ws.human_data, s.ws.animal_data, *s.ws.embedder, ec, mode);
    for (const char* m : {"R_precision_top1", "R_precision_top2", "R_precision_top3", "FID", "MM_Dist", "Diversity", "MModality"}) {
      ASSERT_TRUE(r.metrics.count(m)) << m;
      const auto& sum = r.metrics.at(m);
      ASSERT_EQ(sum.values.size(), 3u);
      double mean = 0;
      for (double v : sum.values) mean += v / 3.0;
      EXPECT_NEAR(sum.mean, mean, 1e-12);
    }
    EXPECT_GT(r.transfer_consistency, 0.0);
    EXPECT_EQ(r.to_json(), evaluate(model, s.ws.human_data, s.ws.animal_data, *s.ws.embedder, ec, mode).to_json());
  }
}
