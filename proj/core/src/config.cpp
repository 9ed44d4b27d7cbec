#include "omgpt/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "omgpt/error.hpp"

#ifndef OMGPT_DEFAULT_DATA_DIR
#define OMGPT_DEFAULT_DATA_DIR "data"
#endif

namespace omgpt {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

ConfigFile ConfigFile::parse(std::string_view text, const std::string& origin) {
  ConfigFile f;
  f.origin_ = origin;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') fail(ErrorCode::ConfigError, where + ": unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (section.empty()) fail(ErrorCode::ConfigError, where + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorCode::ConfigError, where + ": expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) fail(ErrorCode::ConfigError, where + ": empty key");
    if (!f.values_.emplace(std::pair{section, key}, trim(std::string_view(line).substr(eq + 1))).second) {
      fail(ErrorCode::ConfigError, where + ": duplicate key '" + key + "'");
    }
  }
  return f;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ConfigError, "cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str(), path.string());
}

std::optional<std::string> ConfigFile::get(const std::string& section, const std::string& key) const {
  const auto it = values_.find({section, key});
  if (it == values_.end()) return std::nullopt;
  used_.insert(it->first);
  return it->second;
}

std::vector<std::string> ConfigFile::unused() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) {
    if (!used_.count(k)) out.push_back("[" + k.first + "] " + k.second);
  }
  return out;
}

bool RunConfig::operator==(const RunConfig& o) const {
  auto same_spec = [](const DatasetSpec& a, const DatasetSpec& b) {
    return a.seed == b.seed && a.kind == b.kind && a.families == b.families &&
           a.samples_per_family == b.samples_per_family && a.frames.min_frames == b.frames.min_frames &&
           a.frames.max_frames == b.frames.max_frames && a.train_fraction == b.train_fraction && a.fps == b.fps &&
           a.subjects == b.subjects;
  };
  return model == o.model && train == o.train && loss == o.loss && same_spec(human_data, o.human_data) &&
         same_spec(animal_data, o.animal_data) && paths == o.paths && eval == o.eval && embed_seed == o.embed_seed;
}

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("OMGPT_DATA_DIR"); env && *env) return env;
  return OMGPT_DEFAULT_DATA_DIR;
}

namespace {

class Reader {
 public:
  Reader(const ConfigFile& f, std::filesystem::path base) : f_(f), base_(std::move(base)) {}

  template <typename N>
  void number(const std::string& section, const std::string& key, N& out) {
    const auto v = f_.get(section, key);
    if (!v) return;
    const char* first = v->data();
    const char* last = v->data() + v->size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last) bad(section, key, *v);
  }

  void flag(const std::string& section, const std::string& key, bool& out) {
    const auto v = f_.get(section, key);
    if (!v) return;
    if (*v == "true" || *v == "1" || *v == "yes") {
      out = true;
    } else if (*v == "false" || *v == "0" || *v == "no") {
      out = false;
    } else {
      bad(section, key, *v);
    }
  }

  void path(const std::string& section, const std::string& key, std::filesystem::path& out) {
    const auto v = f_.get(section, key);
    if (!v) return;
    if (v->empty()) {
      out.clear();
      return;
    }
    const std::filesystem::path p(*v);
    out = p.is_absolute() || base_.empty() ? p : base_ / p;
    out = out.lexically_normal();
  }

  void list(const std::string& section, const std::string& key, std::vector<std::string>& out) {
    const auto v = f_.get(section, key);
    if (!v) return;
    out.clear();
    std::istringstream in(*v);
    std::string item;
    while (std::getline(in, item, ',')) {
      const std::string t = trim(item);
      if (!t.empty()) out.push_back(t);
    }
  }

  std::optional<std::string> text(const std::string& section, const std::string& key) { return f_.get(section, key); }

  [[noreturn]] void bad(const std::string& section, const std::string& key, const std::string& value) {
    fail(ErrorCode::ConfigError, f_.origin() + ": invalid value '" + value + "' for [" + section + "] " + key);
  }

 private:
  const ConfigFile& f_;
  std::filesystem::path base_;
};

void read_spec(Reader& r, const std::string& s, DatasetSpec& spec) {
  r.number(s, "seed", spec.seed);
  r.list(s, "families", spec.families);
  r.number(s, "samples_per_family", spec.samples_per_family);
  r.number(s, "min_frames", spec.frames.min_frames);
  r.number(s, "max_frames", spec.frames.max_frames);
  r.number(s, "train_fraction", spec.train_fraction);
  r.number(s, "fps", spec.fps);
  r.list(s, "subjects", spec.subjects);
}

}  // namespace

RunConfig resolve_config(const ConfigFile& file, const std::filesystem::path& base) {
  RunConfig c;
  const auto data = default_data_dir();
  c.paths.human_skeleton = data / "toy_human.json";
  c.paths.animal_skeleton = data / "toy_animal.json";
  c.paths.correspondence = data / "toy_correspondence.json";
  c.human_data.kind = SubjectKind::Human;
  c.human_data.seed = 7;
  c.human_data.samples_per_family = 134;
  c.human_data.frames = {64, 196};
  c.animal_data.kind = SubjectKind::Animal;
  c.animal_data.seed = 11;
  c.animal_data.samples_per_family = 54;
  c.animal_data.frames = {48, 196};

  Reader r(file, base);
  ModelConfig& m = c.model;
  r.number("model", "joint_width", m.joint_width);
  r.number("model", "joint_layers", m.joint_layers);
  r.number("model", "temporal_width", m.temporal_width);
  r.number("model", "temporal_layers", m.temporal_layers);
  r.number("model", "temporal_feature", m.temporal_feature);
  r.number("model", "pool", m.pool);
  r.number("model", "max_frames", m.max_frames);
  int primal = -1;
  r.number("model", "primal_slots", primal);
  r.number("model", "latent_width", m.latent_width);
  r.number("model", "clip_dim", m.clip_dim);
  r.number("model", "caption_width", m.caption_width);
  r.number("model", "caption_layers", m.caption_layers);
  r.number("model", "heads", m.heads);
  r.number("model", "ffn_mult", m.ffn_mult);

  TrainConfig& t = c.train;
  r.number("train", "steps", t.steps);
  r.number("train", "batch_size", t.batch_size);
  r.number("train", "lr", t.adam.lr);
  r.number("train", "beta1", t.adam.beta1);
  r.number("train", "beta2", t.adam.beta2);
  r.number("train", "eps", t.adam.eps);
  r.number("train", "ema_decay", t.ema_decay);
  r.number("train", "checkpoint_interval", t.checkpoint_interval);
  r.number("train", "seed", t.seed);
  r.number("train", "clip_norm", t.clip_norm);
  r.flag("train", "ema_for_eval", t.ema_for_eval);

  LossWeights& w = c.loss;
  r.number("loss", "lambda1", w.clip);
  r.number("loss", "lambda2", w.text_recon);
  r.number("loss", "lambda3", w.consistency);
  r.number("loss", "lambda4", w.clip_cross);
  r.number("loss", "lambda5", w.end_effector);
  r.number("loss", "translation", w.translation);

  read_spec(r, "human_data", c.human_data);
  read_spec(r, "animal_data", c.animal_data);

  r.path("paths", "human_skeleton", c.paths.human_skeleton);
  r.path("paths", "animal_skeleton", c.paths.animal_skeleton);
  r.path("paths", "correspondence", c.paths.correspondence);
  r.path("paths", "human_data", c.paths.human_data);
  r.path("paths", "animal_data", c.paths.animal_data);
  r.path("paths", "embedding_table", c.paths.embedding_table);
  r.number("text", "seed", c.embed_seed);

  EvalConfig& e = c.eval;
  r.number("eval", "runs", e.runs);
  r.number("eval", "pool", e.pool);
  r.number("eval", "diversity_pairs_id", e.diversity_pairs_id);
  r.number("eval", "diversity_pairs_ood", e.diversity_pairs_ood);
  r.number("eval", "mm_generations", e.mm_generations);
  r.number("eval", "mm_subset", e.mm_subset);
  r.number("eval", "max_captions", e.max_captions);
  r.number("eval", "seed", e.seed);
  if (const auto side = r.text("eval", "feature_side")) {
    if (*side == "animal") {
      e.feature_side = FeatureSide::Animal;
    } else if (*side == "human") {
      e.feature_side = FeatureSide::Human;
    } else {
      r.bad("eval", "feature_side", *side);
    }
  }

  if (const auto unknown = file.unused(); !unknown.empty()) {
    fail(ErrorCode::ConfigError, file.origin() + ": unknown key " + unknown.front());
  }

  if (primal < 0) {
    const auto slots = load_semantic_map(c.paths.correspondence);
    primal = static_cast<int>(slots.size());
  }
  m.primal_slots = primal;
  m.validate();
  w.validate();
  c.human_data.validate();
  c.animal_data.validate();
  if (t.steps < 0 || t.batch_size <= 0 || t.checkpoint_interval <= 0) {
    fail(ErrorCode::ConfigError, "train steps, batch_size and checkpoint_interval must be positive");
  }
  if (!(t.adam.lr > 0.0) || !(t.ema_decay >= 0.0 && t.ema_decay < 1.0) || t.clip_norm < 0.0) {
    fail(ErrorCode::ConfigError, "lr must be positive, ema_decay in [0, 1), clip_norm non-negative");
  }
  if (e.runs <= 0 || e.pool <= 0 || e.mm_subset <= 0 || e.mm_generations < e.mm_subset || e.max_captions <= 0 ||
      e.diversity_pairs_id <= 0 || e.diversity_pairs_ood <= 0) {
    fail(ErrorCode::ConfigError, "evaluation counts must be positive with mm_generations >= mm_subset");
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  return resolve_config(ConfigFile::load(path), path.parent_path());
}

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + items[i];
  return out;
}

void render_spec(std::ostringstream& o, const std::string& name, const DatasetSpec& s) {
  o << "\n[" << name << "]\n"
    << "seed = " << s.seed << "\n"
    << "families = " << join(s.families) << "\n"
    << "samples_per_family = " << s.samples_per_family << "\n"
    << "min_frames = " << s.frames.min_frames << "\n"
    << "max_frames = " << s.frames.max_frames << "\n"
    << "train_fraction = " << fmt(s.train_fraction) << "\n"
    << "fps = " << fmt(s.fps) << "\n"
    << "subjects = " << join(s.subjects) << "\n";
}

}  // namespace

std::string render_config(const RunConfig& c) {
  std::ostringstream o;
  const ModelConfig& m = c.model;
  o << "[model]\n"
    << "joint_width = " << m.joint_width << "\n"
    << "joint_layers = " << m.joint_layers << "\n"
    << "temporal_width = " << m.temporal_width << "\n"
    << "temporal_layers = " << m.temporal_layers << "\n"
    << "temporal_feature = " << m.temporal_feature << "\n"
    << "pool = " << m.pool << "\n"
    << "max_frames = " << m.max_frames << "\n"
    << "primal_slots = " << m.primal_slots << "\n"
    << "latent_width = " << m.latent_width << "\n"
    << "clip_dim = " << m.clip_dim << "\n"
    << "caption_width = " << m.caption_width << "\n"
    << "caption_layers = " << m.caption_layers << "\n"
    << "heads = " << m.heads << "\n"
    << "ffn_mult = " << m.ffn_mult << "\n";
  const TrainConfig& t = c.train;
  o << "\n[train]\n"
    << "steps = " << t.steps << "\n"
    << "batch_size = " << t.batch_size << "\n"
    << "lr = " << fmt(t.adam.lr) << "\n"
    << "beta1 = " << fmt(t.adam.beta1) << "\n"
    << "beta2 = " << fmt(t.adam.beta2) << "\n"
    << "eps = " << fmt(t.adam.eps) << "\n"
    << "ema_decay = " << fmt(t.ema_decay) << "\n"
    << "checkpoint_interval = " << t.checkpoint_interval << "\n"
    << "seed = " << t.seed << "\n"
    << "clip_norm = " << fmt(t.clip_norm) << "\n"
    << "ema_for_eval = " << (t.ema_for_eval ? "true" : "false") << "\n";
  const LossWeights& w = c.loss;
  o << "\n[loss]\n"
    << "lambda1 = " << fmt(w.clip) << "\n"
    << "lambda2 = " << fmt(w.text_recon) << "\n"
    << "lambda3 = " << fmt(w.consistency) << "\n"
    << "lambda4 = " << fmt(w.clip_cross) << "\n"
    << "lambda5 = " << fmt(w.end_effector) << "\n"
    << "translation = " << fmt(w.translation) << "\n";
  render_spec(o, "human_data", c.human_data);
  render_spec(o, "animal_data", c.animal_data);
  o << "\n[paths]\n"
    << "human_skeleton = " << c.paths.human_skeleton.string() << "\n"
    << "animal_skeleton = " << c.paths.animal_skeleton.string() << "\n"
    << "correspondence = " << c.paths.correspondence.string() << "\n"
    << "human_data = " << c.paths.human_data.string() << "\n"
    << "animal_data = " << c.paths.animal_data.string() << "\n"
    << "embedding_table = " << c.paths.embedding_table.string() << "\n";
  o << "\n[text]\nseed = " << c.embed_seed << "\n";
  const EvalConfig& e = c.eval;
  o << "\n[eval]\n"
    << "runs = " << e.runs << "\n"
    << "pool = " << e.pool << "\n"
    << "diversity_pairs_id = " << e.diversity_pairs_id << "\n"
    << "diversity_pairs_ood = " << e.diversity_pairs_ood << "\n"
    << "mm_generations = " << e.mm_generations << "\n"
    << "mm_subset = " << e.mm_subset << "\n"
    << "max_captions = " << e.max_captions << "\n"
    << "seed = " << e.seed << "\n"
    << "feature_side = " << (e.feature_side == FeatureSide::Animal ? "animal" : "human") << "\n";
  return o.str();
}

}  // namespace omgpt
