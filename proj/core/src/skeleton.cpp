#include "omgpt/skeleton.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "omgpt/error.hpp"

namespace omgpt {

using nlohmann::json;

int SkeletonGraph::degree(int joint) const {
  const int parent_edge = joint == root_ ? 0 : 1;
  return parent_edge + static_cast<int>(children(joint).size());
}

bool SkeletonGraph::is_primal(int joint) const {
  return std::binary_search(primal_.begin(), primal_.end(), joint);
}

Eigen::Vector3d SkeletonGraph::offset(int joint) const {
  const int row = offset_row(joint);
  if (row < 0) return Eigen::Vector3d::Zero();
  return offsets_.row(row).transpose();
}

int SkeletonGraph::dynamic_row(int joint) const {
  const int row = offset_row(joint);
  return row < 0 ? 0 : row + 2;
}

std::optional<int> SkeletonGraph::find(const std::string& joint_name) const {
  const auto it = std::find(joint_names_.begin(), joint_names_.end(), joint_name);
  if (it == joint_names_.end()) return std::nullopt;
  return static_cast<int>(it - joint_names_.begin());
}

bool SkeletonGraph::operator==(const SkeletonGraph& other) const {
  return name_ == other.name_ && joint_names_ == other.joint_names_ && parents_ == other.parents_ &&
         offsets_.rows() == other.offsets_.rows() && offsets_ == other.offsets_ &&
         end_effectors_ == other.end_effectors_;
}

SkeletonGraph build_skeleton(std::string name, std::vector<std::string> joint_names,
                             std::vector<int> parents, SkeletonGraph::OffsetMatrix offsets,
                             std::vector<int> end_effector_ids) {
  const auto count = joint_names.size();
  if (count == 0) fail(ErrorCode::LengthMismatch, "skeleton has no joints");
  if (parents.size() != count) {
    fail(ErrorCode::LengthMismatch, "parents has " + std::to_string(parents.size()) +
                                        " entries for " + std::to_string(count) + " joints");
  }
  if (static_cast<std::size_t>(offsets.rows()) != count - 1) {
    fail(ErrorCode::LengthMismatch, "expected " + std::to_string(count - 1) + " offset rows, got " +
                                        std::to_string(offsets.rows()));
  }

  int root = kNoParent;
  for (std::size_t j = 0; j < count; ++j) {
    const int p = parents[j];
    if (p == kNoParent) {
      if (root != kNoParent) {
        fail(ErrorCode::MultipleRoots, "joints " + std::to_string(root) + " and " +
                                           std::to_string(j) + " both lack a parent");
      }
      root = static_cast<int>(j);
    } else if (p < 0 || static_cast<std::size_t>(p) >= count) {
      fail(ErrorCode::ValidationError, "joint " + std::to_string(j) + " has out-of-range parent " +
                                           std::to_string(p));
    } else if (static_cast<std::size_t>(p) == j) {
      fail(ErrorCode::CycleError, "joint " + std::to_string(j) + " is its own parent");
    }
  }
  if (root == kNoParent) fail(ErrorCode::CycleError, "no root: every joint has a parent");

  std::vector<std::vector<int>> children(count);
  for (std::size_t j = 0; j < count; ++j) {
    if (parents[j] != kNoParent) children[static_cast<std::size_t>(parents[j])].push_back(static_cast<int>(j));
  }

  // Breadth-first walk from the root; anything left unvisited sits on a cycle.
  std::vector<int> order;
  order.reserve(count);
  order.push_back(root);
  for (std::size_t head = 0; head < order.size(); ++head) {
    for (int c : children[static_cast<std::size_t>(order[head])]) order.push_back(c);
  }
  if (order.size() != count) {
    fail(ErrorCode::CycleError, std::to_string(count - order.size()) +
                                    " joints are unreachable from the root");
  }

  std::set<std::string> seen_names;
  for (const auto& n : joint_names) {
    if (!seen_names.insert(n).second) fail(ErrorCode::ValidationError, "duplicate joint name '" + n + "'");
  }

  SkeletonGraph g;
  g.name_ = std::move(name);
  g.joint_names_ = std::move(joint_names);
  g.parents_ = std::move(parents);
  g.offsets_ = std::move(offsets);
  g.children_ = std::move(children);
  g.topo_order_ = std::move(order);
  g.root_ = root;
  g.offset_rows_.assign(count, -1);
  int row = 0;
  for (std::size_t j = 0; j < count; ++j) {
    if (static_cast<int>(j) != root) g.offset_rows_[j] = row++;
  }

  for (int e : end_effector_ids) {
    if (e < 0 || static_cast<std::size_t>(e) >= count) {
      fail(ErrorCode::ValidationError, "end effector index " + std::to_string(e) + " out of range");
    }
    if (!g.is_leaf(e)) {
      fail(ErrorCode::EndEffectorNotLeaf, "joint '" + g.joint_names_[static_cast<std::size_t>(e)] +
                                              "' is not a leaf");
    }
  }
  g.end_effectors_ = std::move(end_effector_ids);
  g.primal_ = primal_joints(g);
  return g;
}

std::vector<int> primal_joints(const SkeletonGraph& graph) {
  std::vector<int> out;
  for (std::size_t j = 0; j < graph.joint_count(); ++j) {
    const int joint = static_cast<int>(j);
    if (joint == graph.root() || graph.degree(joint) != 2) out.push_back(joint);
  }
  return out;
}

PrimalCorrespondence intersect_primal(const SkeletonGraph& a, const SkeletonGraph& b,
                                      std::span<const SemanticSlot> semantic_map) {
  PrimalCorrespondence corr;
  std::set<std::string> slots;
  std::set<int> used_a;
  std::set<int> used_b;

  auto resolve = [](const SkeletonGraph& g, const std::string& joint, std::set<int>& used,
                    const std::string& slot) {
    const auto idx = g.find(joint);
    if (!idx) fail(ErrorCode::NameNotFound, "joint '" + joint + "' not in skeleton '" + g.name() + "'");
    if (!g.is_primal(*idx)) {
      fail(ErrorCode::NotPrimal, "joint '" + joint + "' of '" + g.name() + "' has degree 2");
    }
    if (!used.insert(*idx).second) {
      fail(ErrorCode::DuplicateSlot, "joint '" + joint + "' mapped twice (slot '" + slot + "')");
    }
    return *idx;
  };

  for (const auto& s : semantic_map) {
    if (!slots.insert(s.slot).second) fail(ErrorCode::DuplicateSlot, "slot '" + s.slot + "' repeated");
    corr.slot_names.push_back(s.slot);
    corr.map_a.push_back(resolve(a, s.joint_a, used_a, s.slot));
    corr.map_b.push_back(resolve(b, s.joint_b, used_b, s.slot));
  }
  return corr;
}

namespace {

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ParseError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::ParseError, "cannot write " + path.string());
  out << text << '\n';
}

}  // namespace

SkeletonGraph load_skeleton(const std::filesystem::path& path) {
  const json doc = read_json(path);
  std::string name;
  std::vector<std::string> names;
  std::vector<std::string> parent_names;
  std::vector<Eigen::Vector3d> raw_offsets;
  std::vector<std::string> effector_names;
  try {
    name = doc.at("name").get<std::string>();
    for (const auto& j : doc.at("joints")) {
      names.push_back(j.at("name").get<std::string>());
      parent_names.push_back(j.at("parent").is_null() ? std::string() : j.at("parent").get<std::string>());
      const auto off = j.at("offset").get<std::vector<double>>();
      if (off.size() != 3) fail(ErrorCode::ParseError, "offset of '" + names.back() + "' is not a 3-vector");
      raw_offsets.emplace_back(off[0], off[1], off[2]);
    }
    effector_names = doc.at("end_effectors").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, path.string() + ": " + e.what());
  }

  auto index_of = [&](const std::string& n) {
    const auto it = std::find(names.begin(), names.end(), n);
    if (it == names.end()) fail(ErrorCode::ValidationError, "unknown joint '" + n + "' in " + path.string());
    return static_cast<int>(it - names.begin());
  };

  std::vector<int> parents;
  for (const auto& p : parent_names) parents.push_back(p.empty() ? kNoParent : index_of(p));
  std::vector<int> effectors;
  for (const auto& e : effector_names) effectors.push_back(index_of(e));

  SkeletonGraph::OffsetMatrix offsets(static_cast<Eigen::Index>(names.empty() ? 0 : names.size() - 1), 3);
  Eigen::Index row = 0;
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (parents[j] == kNoParent) continue;
    if (row >= offsets.rows()) break;  // multiple roots: reported by build_skeleton
    offsets.row(row++) = raw_offsets[j].transpose();
  }

  try {
    return build_skeleton(std::move(name), std::move(names), std::move(parents), std::move(offsets),
                          std::move(effectors));
  } catch (const Error& e) {
    fail(ErrorCode::ValidationError, path.string() + ": " + e.what());
  }
}

void save_skeleton(const SkeletonGraph& graph, const std::filesystem::path& path) {
  json doc;
  doc["name"] = graph.name();
  json joints = json::array();
  for (std::size_t j = 0; j < graph.joint_count(); ++j) {
    const int joint = static_cast<int>(j);
    json entry;
    entry["name"] = graph.joint_names()[j];
    const int p = graph.parent(joint);
    entry["parent"] = p == kNoParent ? json(nullptr) : json(graph.joint_names()[static_cast<std::size_t>(p)]);
    const Eigen::Vector3d off = graph.offset(joint);
    entry["offset"] = {off.x(), off.y(), off.z()};
    joints.push_back(entry);
  }
  doc["joints"] = joints;
  json effectors = json::array();
  for (int e : graph.end_effector_ids()) effectors.push_back(graph.joint_names()[static_cast<std::size_t>(e)]);
  doc["end_effectors"] = effectors;
  write_text(path, doc.dump(2));
}

std::vector<SemanticSlot> load_semantic_map(const std::filesystem::path& path) {
  const json doc = read_json(path);
  std::vector<SemanticSlot> slots;
  try {
    for (const auto& s : doc) {
      slots.push_back({s.at("slot").get<std::string>(), s.at("a").get<std::string>(),
                       s.at("b").get<std::string>()});
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return slots;
}

void save_semantic_map(std::span<const SemanticSlot> slots, const std::filesystem::path& path) {
  json doc = json::array();
  for (const auto& s : slots) doc.push_back({{"slot", s.slot}, {"a", s.joint_a}, {"b", s.joint_b}});
  write_text(path, doc.dump(2));
}

}  // namespace omgpt
