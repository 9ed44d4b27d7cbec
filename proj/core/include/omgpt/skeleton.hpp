#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace omgpt {

inline constexpr int kNoParent = -1;

/// Articulated skeleton stored as a rooted tree.
///
/// Offsets are kept for non-root joints only, in increasing joint-index order,
/// so row `r` of `offsets()` belongs to the r-th non-root joint. The same
/// ordering is used for per-joint rotations in a MotionSequence.
///
/// Instances are immutable once built; use build_skeleton() to construct one.
class SkeletonGraph {
 public:
  using OffsetMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

  SkeletonGraph() = default;

  const std::string& name() const { return name_; }
  std::size_t joint_count() const { return joint_names_.size(); }
  std::span<const std::string> joint_names() const { return joint_names_; }
  std::span<const int> parents() const { return parents_; }
  const OffsetMatrix& offsets() const { return offsets_; }
  std::span<const int> end_effector_ids() const { return end_effectors_; }
  std::span<const int> primal_ids() const { return primal_; }

  int root() const { return root_; }
  int parent(int joint) const { return parents_.at(static_cast<std::size_t>(joint)); }
  std::span<const int> children(int joint) const { return children_.at(static_cast<std::size_t>(joint)); }

  /// Tree degree: one for the parent edge (non-root joints) plus the child count.
  int degree(int joint) const;
  bool is_leaf(int joint) const { return joint != root_ && children(joint).empty(); }
  bool is_primal(int joint) const;

  /// Row of `offsets()` holding this joint's offset, or -1 for the root.
  int offset_row(int joint) const { return offset_rows_.at(static_cast<std::size_t>(joint)); }
  Eigen::Vector3d offset(int joint) const;

  /// Joints ordered so that every parent precedes its children.
  std::span<const int> topological_order() const { return topo_order_; }

  /// Row of the (J+1)-row dynamic tensor holding this joint's rotation:
  /// the root maps to row 0 (global rotation), non-root joint with offset row r
  /// maps to r + 2. Row 1 is the zero-padded global translation.
  int dynamic_row(int joint) const;

  std::optional<int> find(const std::string& joint_name) const;

  bool operator==(const SkeletonGraph& other) const;

 private:
  friend SkeletonGraph build_skeleton(std::string, std::vector<std::string>, std::vector<int>,
                                      OffsetMatrix, std::vector<int>);

  std::string name_;
  std::vector<std::string> joint_names_;
  std::vector<int> parents_;
  OffsetMatrix offsets_;
  std::vector<int> end_effectors_;
  std::vector<int> primal_;
  std::vector<std::vector<int>> children_;
  std::vector<int> offset_rows_;
  std::vector<int> topo_order_;
  int root_ = kNoParent;
};

/// Validates the parent array and builds the graph.
///
/// Throws Error with LengthMismatch, MultipleRoots, CycleError,
/// ValidationError (out-of-range indices) or EndEffectorNotLeaf.
SkeletonGraph build_skeleton(std::string name, std::vector<std::string> joint_names,
                             std::vector<int> parents, SkeletonGraph::OffsetMatrix offsets,
                             std::vector<int> end_effector_ids);

/// Sorted indices of joints with degree != 2. The root is always included,
/// even when it has exactly two children, so every skeleton exposes a root slot.
std::vector<int> primal_joints(const SkeletonGraph& graph);

/// One row of a semantic correspondence file.
struct SemanticSlot {
  std::string slot;
  std::string joint_a;
  std::string joint_b;
};

/// Aligned primal joints between two skeletons.
struct PrimalCorrespondence {
  std::vector<std::string> slot_names;
  std::vector<int> map_a;
  std::vector<int> map_b;

  std::size_t size() const { return slot_names.size(); }
  PrimalCorrespondence swapped() const { return {slot_names, map_b, map_a}; }
  bool operator==(const PrimalCorrespondence&) const = default;
};

PrimalCorrespondence intersect_primal(const SkeletonGraph& a, const SkeletonGraph& b,
                                      std::span<const SemanticSlot> semantic_map);

SkeletonGraph load_skeleton(const std::filesystem::path& path);
void save_skeleton(const SkeletonGraph& graph, const std::filesystem::path& path);

std::vector<SemanticSlot> load_semantic_map(const std::filesystem::path& path);
void save_semantic_map(std::span<const SemanticSlot> slots, const std::filesystem::path& path);

}  // namespace omgpt
