#include <gtest/gtest.h>

#include "omgpt/config.hpp"
#include "omgpt/error.hpp"
#include "support.hpp"

using namespace omgpt;

namespace {

ErrorCode config_error(std::string_view text) {
  try {
    resolve_config(ConfigFile::parse(text), test::data_dir());
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::DataEmpty;
}

}  // namespace

TEST(Config, DefaultsMatchModelDefaults) {
  const RunConfig cfg = resolve_config(ConfigFile{});
  // slot count follows the configured correspondence file
  ModelConfig want;
  want.primal_slots = static_cast<int>(load_semantic_map(cfg.paths.correspondence).size());
  EXPECT_EQ(cfg.model, want);
  EXPECT_EQ(cfg.model.latent_frames(), 49);
  EXPECT_EQ(cfg.eval.runs, 20);
  EXPECT_EQ(cfg.eval.pool, 32);
}

TEST(Config, RenderResolveRoundTrip) {
  for (const char* name : {"toy.cfg", "desk.cfg"}) {
    const RunConfig cfg = load_config(test::config_dir() / name);
    const RunConfig again = resolve_config(ConfigFile::parse(render_config(cfg)));
    EXPECT_TRUE(again == cfg) << name;
    EXPECT_EQ(render_config(again), render_config(cfg));
  }
}

TEST(Config, ToyConfigValues) {
  const RunConfig cfg = test::toy_config();
  EXPECT_EQ(cfg.model.max_frames, 32);
  EXPECT_EQ(cfg.model.primal_slots, 4);
  EXPECT_EQ(cfg.train.adam.lr, 1e-3);
  EXPECT_TRUE(std::filesystem::exists(cfg.paths.human_skeleton));
}

TEST(Config, RejectsBadInput) {
  EXPECT_EQ(config_error("[model]\njoint_width = 0\n"), ErrorCode::ConfigError);
  EXPECT_EQ(config_error("[model]\nmax_frames = 30\npool = 4\n"), ErrorCode::ConfigError);
  EXPECT_EQ(config_error("[model]\njoint_widht = 8\n"), ErrorCode::ConfigError);
  EXPECT_EQ(config_error("[train]\nlr = fast\n"), ErrorCode::ConfigError);
  EXPECT_EQ(config_error("[train\nlr = 1\n"), ErrorCode::ConfigError);
  EXPECT_EQ(config_error("lr 1\n"), ErrorCode::ConfigError);
  EXPECT_EQ(config_error("[train]\nlr = 1\nlr = 2\n"), ErrorCode::ConfigError);
  EXPECT_EQ(config_error("[loss]\nconsistency = -1\n"), ErrorCode::ConfigError);
  EXPECT_EQ(config_error("[human_data]\nfamilies = walk, swim\n"), ErrorCode::UnknownFamily);
}

TEST(Config, CommentsAndWhitespaceAreIgnored) {
  const auto file = ConfigFile::parse("# top\n\n[train]\n  steps = 12   # trailing\n");
  EXPECT_EQ(file.get("train", "steps").value(), "12");
  EXPECT_FALSE(file.get("train", "batch_size").has_value());
}
