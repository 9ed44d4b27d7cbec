#include <malloc.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "omgpt/error.hpp"
#include "omgpt/evaluation.hpp"
#include "omgpt/gradcheck.hpp"
#include "omgpt/rotmath.hpp"
#include "omgpt/trainer.hpp"

namespace fs = std::filesystem;
using namespace omgpt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::ConfigMismatch:
    case ErrorCode::DimensionMismatch:
      return kExitConfig;
    case ErrorCode::NanLoss:
    case ErrorCode::NonFiniteStats:
    case ErrorCode::DegenerateRotation:
    case ErrorCode::NotARotation:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::InvalidAxis:
    case ErrorCode::NotScalar:
      return kExitNumeric;
    default:
      return kExitData;
  }
}

RunConfig config_or_defaults(const std::string& path) {
  return path.empty() ? resolve_config(ConfigFile{}, {}) : load_config(path);
}

// Accepts either a training output directory or its checkpoint subdirectory.
fs::path checkpoint_dir(const fs::path& dir) {
  if (!fs::exists(dir / kStateFile) && fs::exists(dir / "checkpoint" / kStateFile)) return dir / "checkpoint";
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorCode::ParseError, "cannot write " + path.string());
  out << text;
}

void write_positions_csv(const MotionSequence& motion, const SkeletonGraph& graph, const fs::path& path) {
  const JointPositions pos = forward_kinematics(motion, graph);
  std::ostringstream o;
  o.precision(9);
  o << "frame,joint,name,x,y,z\n";
  for (std::size_t t = 0; t < pos.frames; ++t) {
    for (std::size_t j = 0; j < pos.joints; ++j) {
      const auto& p = pos.at(t, j);
      o << t << ',' << j << ',' << graph.joint_names()[j] << ',' << p.x() << ',' << p.y() << ',' << p.z() << '\n';
    }
  }
  write_text(path, o.str());
}

int data_synth(const std::string& spec_path, const fs::path& out) {
  RunConfig cfg = config_or_defaults(spec_path);
  cfg.paths.human_data.clear();
  cfg.paths.animal_data.clear();
  const Workspace ws = Workspace::load(cfg);
  save_dataset(ws.human_data, out / "human");
  save_dataset(ws.animal_data, out / "animal");
  write_text(out / kConfigEcho, render_config(cfg));
  std::cerr << "wrote " << ws.human_data.entries.size() << " human and " << ws.animal_data.entries.size()
            << " animal motions to " << out.string() << "\n";
  return kExitOk;
}

int skeleton_inspect(const fs::path& file) {
  const SkeletonGraph g = load_skeleton(file);
  std::cout << "skeleton " << g.name() << ": " << g.joint_count() << " joints\n";
  std::cout << "index  name                 parent               degree  primal  end_effector\n";
  for (std::size_t j = 0; j < g.joint_count(); ++j) {
    const int joint = static_cast<int>(j);
    const int p = g.parent(joint);
    const auto effectors = g.end_effector_ids();
    const bool is_effector = std::find(effectors.begin(), effectors.end(), joint) != effectors.end();
    std::printf("%5zu  %-20s %-20s %6d  %-6s  %s\n", j, g.joint_names()[j].c_str(),
                p == kNoParent ? "-" : g.joint_names()[static_cast<std::size_t>(p)].c_str(), g.degree(joint),
                g.is_primal(joint) ? "yes" : "no", is_effector ? "yes" : "no");
  }
  std::cout << "primal joints (" << g.primal_ids().size() << "):";
  for (int j : g.primal_ids()) std::cout << ' ' << g.joint_names()[static_cast<std::size_t>(j)];
  std::cout << "\nend effectors (" << g.end_effector_ids().size() << "):";
  for (int j : g.end_effector_ids()) std::cout << ' ' << g.joint_names()[static_cast<std::size_t>(j)];
  std::cout << "\n";
  return kExitOk;
}

int train(const std::string& config_path, const fs::path& out, bool resume, int log_every) {
  const RunConfig cfg = config_or_defaults(config_path);
  const Workspace ws = Workspace::load(cfg);
  const fs::path ckpt = out / "checkpoint";
  Trainer trainer = resume && fs::exists(ckpt / kStateFile) ? Trainer::resume(ckpt, cfg, ws) : Trainer(cfg, ws);
  if (trainer.steps_done() > 0) std::cerr << "resuming at step " << trainer.steps_done() << "\n";
  const auto& names = TotalLoss<float>::component_names();
  trainer.run(out, [&](std::int64_t k, const std::vector<double>& report) {
    if (log_every <= 0 || (k % log_every != 0 && k + 1 != cfg.train.steps)) return;
    std::cerr << "step " << k;
    for (std::size_t i = 0; i < names.size(); ++i) std::cerr << ' ' << names[i] << '=' << report[i];
    std::cerr << "\n";
  });
  std::cerr << "finished " << trainer.steps_done() << " steps; checkpoint in " << ckpt.string() << "\n";
  return kExitOk;
}

int generate(const fs::path& checkpoint, const std::string& text, const std::string& animal, const fs::path& source,
             const fs::path& out, fs::path positions, bool live_weights) {
  const fs::path dir = checkpoint_dir(checkpoint);
  const RunConfig cfg = checkpoint_config(dir);
  const Workspace ws = Workspace::skeletons(cfg);
  const OmgptModel<float> model = load_model(dir, cfg, ws, cfg.train.ema_for_eval && !live_weights);
  MotionSequence src = read_motion(source, ws.human.name());
  validate_motion(src, ws.human, kHumanFrames);
  const MotionSequence result = infer(model, *ws.embedder, text, src, animal);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_motion(result, out);
  if (positions.empty()) positions = fs::path(out).replace_extension(".positions.csv");
  write_positions_csv(result, ws.animal, positions);
  std::cerr << "wrote " << out.string() << " (" << result.frames() << " frames) and " << positions.string() << "\n";
  return kExitOk;
}

int evaluate_cmd(const fs::path& checkpoint, const fs::path& dataset, const std::string& mode_name,
                 const fs::path& report, const std::string& side, int runs, std::int64_t seed, bool live_weights) {
  const fs::path dir = checkpoint_dir(checkpoint);
  RunConfig cfg = checkpoint_config(dir);
  if (!side.empty()) cfg.eval.feature_side = side == "human" ? FeatureSide::Human : FeatureSide::Animal;
  if (runs > 0) cfg.eval.runs = runs;
  if (seed >= 0) cfg.eval.seed = static_cast<std::uint64_t>(seed);
  const Workspace ws = dataset.empty() ? Workspace::load(cfg) : Workspace::load(cfg, dataset);
  const OmgptModel<float> model = load_model(dir, cfg, ws, cfg.train.ema_for_eval && !live_weights);
  const EvalMode mode = mode_name == "ood" ? EvalMode::OutOfDistribution : EvalMode::InDistribution;
  const EvalReport r = evaluate(model, ws.human_data, ws.animal_data, *ws.embedder, cfg.eval, mode);
  write_text(report, r.to_json());
  for (const auto& [name, m] : r.metrics) {
    std::fprintf(stderr, "%-20s %.4f +/- %.4f\n", name.c_str(), m.mean, m.std);
  }
  std::fprintf(stderr, "%-20s %.6f\n", "transfer_L_cons", r.transfer_consistency);
  return kExitOk;
}

int gradcheck(const std::string& config_path, int shape_seeds, double tolerance) {
  const RunConfig cfg = config_or_defaults(config_path);
  GradcheckOptions opts;
  opts.tolerance = tolerance;
  bool ok = true;
  auto show = [&](const GradcheckResult& r, const std::string& tag) {
    ok = ok && r.passed;
    std::printf("%-4s %-22s %-10s rel_err=%.3e coords=%zu\n", r.passed ? "ok" : "FAIL", r.name.c_str(), tag.c_str(),
                r.relative_error, r.coordinates);
  };
  for (int s = 0; s < shape_seeds; ++s) {
    opts.seed = static_cast<std::uint64_t>(s);
    for (const auto& r : gradcheck_ops(opts)) show(r, "shapes#" + std::to_string(s));
  }
  opts.seed = cfg.train.seed;
  for (const auto& r : gradcheck_losses(cfg, opts)) show(r, "loss");
  std::printf("%s\n", ok ? "gradcheck passed" : "gradcheck FAILED");
  return ok ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  // Training allocates and frees many large activation buffers per step; keep
  // them on the heap instead of round-tripping through mmap and page faults.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);

  CLI::App app{"omgpt: text-driven motion transfer between human and animal skeletons"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand help for every subcommand");

  auto* data = app.add_subcommand("data", "Dataset utilities")->require_subcommand(1);
  std::string spec_path;
  fs::path synth_out;
  auto* synth = data->add_subcommand("synth", "Generate the synthetic human and animal datasets");
  synth->add_option("--spec", spec_path, "Config file with [human_data], [animal_data] and [paths] (empty: built-in)");
  synth->add_option("--out", synth_out, "Output directory; receives human/ and animal/")->required();

  auto* skel = app.add_subcommand("skeleton", "Skeleton utilities")->require_subcommand(1);
  fs::path skel_file;
  auto* inspect = skel->add_subcommand("inspect", "Print joints, degrees, primal joints and end effectors");
  inspect->add_option("file", skel_file, "Skeleton JSON")->required();

  std::string train_config;
  fs::path train_out;
  bool resume = false;
  int log_every = 50;
  auto* train_cmd = app.add_subcommand("train", "Jointly train both autoencoders and the cross-domain objective");
  train_cmd->add_option("--config", train_config,
                        "Run config; unset keys use the defaults (steps 3000, batch 16, lr 1e-4, EMA 0.99, "
                        "lambda 1/1/0.1/1/100, latent 49x7x16)");
  train_cmd->add_option("--out", train_out, "Output directory (config echo, losses.csv, checkpoint/)")->required();
  train_cmd->add_flag("--resume", resume, "Continue from <out>/checkpoint when present");
  train_cmd->add_option("--log-every", log_every, "Print losses to stderr every N steps (0: never)")
      ->capture_default_str();

  fs::path gen_ckpt, gen_source, gen_out, gen_positions;
  std::string gen_text, gen_animal;
  bool gen_live = false;
  auto* gen = app.add_subcommand("generate", "Transfer a human motion to the animal skeleton under a caption");
  gen->add_option("--checkpoint", gen_ckpt, "Training output or checkpoint directory")->required();
  gen->add_option("--text", gen_text, "Caption describing the motion")->required();
  gen->add_option("--animal", gen_animal, "Species substituted for the caption subject")->required();
  gen->add_option("--source-motion", gen_source, "Human motion (.bin)")->required();
  gen->add_option("--out", gen_out, "Output animal motion (.bin)")->required();
  gen->add_option("--positions", gen_positions, "Joint positions CSV (default: <out stem>.positions.csv)");
  gen->add_flag("--live-weights", gen_live, "Use the live weights instead of the EMA weights (default: EMA)");

  fs::path eval_ckpt, eval_data, eval_report;
  std::string eval_mode = "id", eval_side;
  int eval_runs = 0;
  std::int64_t eval_seed = -1;
  bool eval_live = false;
  auto* eval = app.add_subcommand("evaluate", "R-precision, FID, MM-Dist, Diversity and MModality over seeded runs");
  eval->add_option("--checkpoint", eval_ckpt, "Training output or checkpoint directory")->required();
  eval->add_option("--dataset", eval_data,
                   "Directory written by 'data synth' (default: regenerate from the checkpoint config)");
  eval->add_option("--mode", eval_mode, "id: animal test captions; ood: subject-swapped human captions")
      ->check(CLI::IsMember({"id", "ood"}))
      ->capture_default_str();
  eval->add_option("--report", eval_report, "Output JSON report")->required();
  eval->add_option("--feature-side", eval_side, "Which E_t maps motions to features (default: animal)")
      ->check(CLI::IsMember({"animal", "human"}));
  eval->add_option("--runs", eval_runs, "Evaluation repeats (default: config, 20)");
  eval->add_option("--seed", eval_seed, "Base seed of the runs (default: config, 2024)");
  eval->add_flag("--live-weights", eval_live, "Use the live weights instead of the EMA weights (default: EMA)");

  std::string gc_config;
  int gc_seeds = 20;
  double gc_tol = 1e-4;
  auto* gc = app.add_subcommand("gradcheck", "Central finite-difference audit of every op and loss (64-bit)");
  gc->add_option("--config", gc_config, "Run config; the model part is checked (empty: built-in toy skeletons)");
  gc->add_option("--shape-seeds", gc_seeds, "Random shape draws for the op checks")->capture_default_str();
  gc->add_option("--tolerance", gc_tol, "Maximum relative error")->capture_default_str();

  std::string show_config;
  auto* cfg_cmd = app.add_subcommand("config", "Print the fully resolved configuration");
  cfg_cmd->add_option("--config", show_config, "Config file (empty: built-in defaults)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << "\n" << app.help();
    return kExitConfig;
  }

  try {
    if (synth->parsed()) return data_synth(spec_path, synth_out);
    if (inspect->parsed()) return skeleton_inspect(skel_file);
    if (train_cmd->parsed()) return train(train_config, train_out, resume, log_every);
    if (gen->parsed()) return generate(gen_ckpt, gen_text, gen_animal, gen_source, gen_out, gen_positions, gen_live);
    if (eval->parsed()) {
      return evaluate_cmd(eval_ckpt, eval_data, eval_mode, eval_report, eval_side, eval_runs, eval_seed, eval_live);
    }
    if (gc->parsed()) return gradcheck(gc_config, gc_seeds, gc_tol);
    if (cfg_cmd->parsed()) {
      std::cout << render_config(config_or_defaults(show_config));
      return kExitOk;
    }
  } catch (const Error& e) {
    std::cerr << "omgpt: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "omgpt: " << e.what() << "\n";
    return kExitData;
  }
  return kExitConfig;
}
