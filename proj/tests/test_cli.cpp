#include <gtest/gtest.h>

#include <fstream>

#include <json.hpp>

#include "omgpt/datagen.hpp"
#include "omgpt/trainer.hpp"
#include "cli_runner.hpp"
#include "support.hpp"

using namespace omgpt;
namespace fs = std::filesystem;

using test::omgpt_cli;
using test::quoted;

TEST(Cli, HelpShowsDefaults) {
  const auto r = omgpt_cli("train --help");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.output.find("steps 3000"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("50"), std::string::npos);
}

TEST(Cli, UnknownFlagIsAConfigError) {
  const auto r = omgpt_cli("train --out /tmp/x --no-such-flag");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("Usage"), std::string::npos) << r.output;
  EXPECT_EQ(omgpt_cli("").code, 2);
}

TEST(Cli, SkeletonInspectListsJoints) {
  const auto r = omgpt_cli("skeleton inspect " + quoted(test::data_dir() / "smal.json"));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.output.find("35 joints"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("end effectors (5)"), std::string::npos);
  EXPECT_EQ(omgpt_cli("skeleton inspect /nonexistent/skeleton.json").code, 3);
}

TEST(Cli, BadConfigValuesExitWithTwo) {
  const auto dir = test::scratch_dir("cli_badcfg");
  {
    std::ofstream(dir / "bad.cfg") << "[model]\npool = 0\n";
  }
  EXPECT_EQ(omgpt_cli("train --config " + quoted(dir / "bad.cfg") + " --out " + quoted(dir / "o")).code, 2);
  EXPECT_EQ(omgpt_cli("config --config " + quoted(dir / "bad.cfg")).code, 2);
}

TEST(Cli, MissingCheckpointIsADataError) {
  const auto dir = test::scratch_dir("cli_nockpt");
  const auto r = omgpt_cli("evaluate --checkpoint " + quoted(dir) + " --report " + quoted(dir / "r.json"));
  EXPECT_EQ(r.code, 3) << r.output;
}

TEST(Cli, SynthTrainGenerateEvaluate) {
  const auto dir = test::scratch_dir("cli_pipeline");
  const auto toy = test::config_dir() / "toy.cfg";
  {
    // toy config with a short run
    std::ifstream in(toy);
    std::ofstream out(dir / "run.cfg");
    std::string line;
    while (std::getline(in, line)) {
      if (line.rfind("steps", 0) == 0) line = "steps = 4";
      if (line.rfind("human_skeleton", 0) == 0) line = "human_skeleton = " + (test::data_dir() / "toy_human.json").string();
      if (line.rfind("animal_skeleton", 0) == 0) line = "animal_skeleton = " + (test::data_dir() / "toy_animal.json").string();
      if (line.rfind("correspondence", 0) == 0) line = "correspondence = " + (test::data_dir() / "toy_correspondence.json").string();
      out << line << '\n';
    }
  }
  const auto cfg = quoted(dir / "run.cfg");
  auto r = omgpt_cli("data synth --spec " + cfg + " --out " + quoted(dir / "data"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(fs::exists(dir / "data" / "human" / "index.json"));
  EXPECT_TRUE(fs::exists(dir / "data" / "animal" / "index.json"));

  r = omgpt_cli("train --config " + cfg + " --out " + quoted(dir / "run") + " --log-every 0");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(fs::exists(dir / "run" / kConfigEcho));
  EXPECT_TRUE(fs::exists(dir / "run" / "checkpoint" / kCheckpointFile));

  const RunConfig rc = load_config(dir / "run.cfg");
  const auto human = load_skeleton(rc.paths.human_skeleton);
  std::mt19937_64 rng(1);
  write_motion(test::smooth_motion(rng, human, 24), dir / "src.bin");
  r = omgpt_cli("generate --checkpoint " + quoted(dir / "run") + " --text 'a person walks forward' --animal dog" +
                " --source-motion " + quoted(dir / "src.bin") + " --out " + quoted(dir / "dog.bin"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto animal = load_skeleton(rc.paths.animal_skeleton);
  const auto dog = read_motion(dir / "dog.bin", animal.name());
  EXPECT_EQ(dog.frames(), 24u);
  EXPECT_EQ(dog.joint_count(), animal.joint_count());
  std::ifstream csv(dir / "dog.positions.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "frame,joint,name,x,y,z");
  int rows = 0;
  for (std::string l; std::getline(csv, l);) ++rows;
  EXPECT_EQ(rows, static_cast<int>(24 * animal.joint_count()));

  r = omgpt_cli("generate --checkpoint " + quoted(dir / "run") + " --text 'walks forward' --animal dog" +
                " --source-motion " + quoted(dir / "src.bin") + " --out " + quoted(dir / "x.bin"));
  EXPECT_EQ(r.code, 3) << r.output;

  r = omgpt_cli("evaluate --checkpoint " + quoted(dir / "run") + " --dataset " + quoted(dir / "data") +
                " --mode ood --runs 3 --report " + quoted(dir / "ood.json"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto report = nlohmann::json::parse(std::ifstream(dir / "ood.json"));
  EXPECT_EQ(report.at("protocol").at("mode"), "ood");
  EXPECT_EQ(report.at("FID").at("runs"), 3);
}
