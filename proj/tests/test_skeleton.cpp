#include <gtest/gtest.h>

#include <fstream>
#include <functional>

#include "omgpt/error.hpp"
#include "omgpt/skeleton.hpp"
#include "support.hpp"

using namespace omgpt;

namespace {

SkeletonGraph::OffsetMatrix unit_offsets(int rows) {
  SkeletonGraph::OffsetMatrix m(rows, 3);
  m.setConstant(0.1);
  return m;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::ConfigError;
}

}  // namespace

TEST(Skeleton, ChainPrimalJointsAreRootAndTip) {
  const auto g = build_skeleton("chain", {"a", "b", "c", "d"}, {-1, 0, 1, 2}, unit_offsets(3), {3});
  EXPECT_EQ(g.root(), 0);
  EXPECT_EQ(std::vector<int>(g.primal_ids().begin(), g.primal_ids().end()), (std::vector<int>{0, 3}));
  EXPECT_EQ(g.degree(1), 2);
  EXPECT_EQ(g.degree(3), 1);
  EXPECT_TRUE(g.is_leaf(3));
  EXPECT_EQ(g.dynamic_row(0), 0);
  EXPECT_EQ(g.dynamic_row(1), 2);
  EXPECT_EQ(g.dynamic_row(3), 4);
}

TEST(Skeleton, RootWithTwoChildrenStaysPrimal) {
  const auto g = build_skeleton("v", {"r", "l", "rr"}, {-1, 0, 0}, unit_offsets(2), {1, 2});
  EXPECT_EQ(g.degree(0), 2);
  EXPECT_TRUE(g.is_primal(0));
}

TEST(Skeleton, ParentsPrecedeChildrenInTopologicalOrder) {
  // root placed last so index order is not already topological
  const auto g = build_skeleton("t", {"a", "b", "c", "root"}, {3, 0, 0, -1}, unit_offsets(3), {1, 2});
  std::vector<int> seen(4, -1);
  for (std::size_t i = 0; i < g.topological_order().size(); ++i) seen[static_cast<std::size_t>(g.topological_order()[i])] = static_cast<int>(i);
  for (int j = 0; j < 4; ++j) {
    if (g.parent(j) != kNoParent) EXPECT_LT(seen[static_cast<std::size_t>(g.parent(j))], seen[static_cast<std::size_t>(j)]);
  }
  EXPECT_EQ(g.offset_row(3), -1);
  EXPECT_EQ(g.offset_row(0), 0);
  EXPECT_EQ(g.offset_row(2), 2);
}

TEST(Skeleton, RejectsMalformedTrees) {
  EXPECT_EQ(code_of([] { build_skeleton("x", {"a", "b"}, {-1, -1}, unit_offsets(1), {}); }),
            ErrorCode::MultipleRoots);
  EXPECT_EQ(code_of([] { build_skeleton("x", {"a", "b", "c"}, {-1, 2, 1}, unit_offsets(2), {}); }),
            ErrorCode::CycleError);
  EXPECT_EQ(code_of([] { build_skeleton("x", {"a", "b"}, {1, 0}, unit_offsets(1), {}); }), ErrorCode::CycleError);
  EXPECT_EQ(code_of([] { build_skeleton("x", {"a", "b"}, {-1}, unit_offsets(1), {}); }), ErrorCode::LengthMismatch);
  EXPECT_EQ(code_of([] { build_skeleton("x", {"a", "b"}, {-1, 0}, unit_offsets(2), {}); }),
            ErrorCode::LengthMismatch);
  EXPECT_EQ(code_of([] { build_skeleton("x", {"a", "b", "c"}, {-1, 0, 1}, unit_offsets(2), {1}); }),
            ErrorCode::EndEffectorNotLeaf);
  EXPECT_EQ(code_of([] { build_skeleton("x", {"a", "a"}, {-1, 0}, unit_offsets(1), {}); }),
            ErrorCode::ValidationError);
}

TEST(Skeleton, BundledSkeletonsHaveDocumentedSizes) {
  const auto smpl = load_skeleton(test::data_dir() / "smpl.json");
  const auto smal = load_skeleton(test::data_dir() / "smal.json");
  EXPECT_EQ(smpl.joint_count(), 22u);
  EXPECT_EQ(smal.joint_count(), 35u);
  EXPECT_EQ(smpl.end_effector_ids().size(), 5u);
  EXPECT_EQ(smal.end_effector_ids().size(), 5u);
  const auto map = load_semantic_map(test::data_dir() / "smpl_smal_correspondence.json");
  const auto corr = intersect_primal(smpl, smal, map);
  EXPECT_EQ(corr.size(), 7u);
  for (std::size_t s = 0; s < corr.size(); ++s) {
    EXPECT_TRUE(smpl.is_primal(corr.map_a[s]));
    EXPECT_TRUE(smal.is_primal(corr.map_b[s]));
  }
  EXPECT_EQ(corr.swapped().map_a, corr.map_b);
}

TEST(Skeleton, CorrespondenceRejectsBadSlots) {
  const auto smpl = load_skeleton(test::data_dir() / "smpl.json");
  const auto smal = load_skeleton(test::data_dir() / "smal.json");
  const std::vector<SemanticSlot> missing{{"x", "no_such_joint", "Mouth"}};
  EXPECT_EQ(code_of([&] { intersect_primal(smpl, smal, missing); }), ErrorCode::NameNotFound);
  const std::vector<SemanticSlot> twice{{"x", "head", "Mouth"}, {"x", "left_foot", "LFoot"}};
  EXPECT_EQ(code_of([&] { intersect_primal(smpl, smal, twice); }), ErrorCode::DuplicateSlot);
  const std::vector<SemanticSlot> reuse{{"x", "head", "Mouth"}, {"y", "head", "LFoot"}};
  EXPECT_EQ(code_of([&] { intersect_primal(smpl, smal, reuse); }), ErrorCode::DuplicateSlot);
  // spine1 sits in the middle of the spine chain (degree 2)
  ASSERT_TRUE(smpl.find("spine1").has_value());
  ASSERT_EQ(smpl.degree(*smpl.find("spine1")), 2);
  const std::vector<SemanticSlot> mid{{"x", "spine1", "Mouth"}};
  EXPECT_EQ(code_of([&] { intersect_primal(smpl, smal, mid); }), ErrorCode::NotPrimal);
}

TEST(Skeleton, SaveLoadRoundTrip) {
  std::mt19937_64 rng(11);
  const auto dir = test::scratch_dir("skeleton_io");
  for (int i = 0; i < 5; ++i) {
    const auto g = test::random_skeleton(rng, 3 + i * 4);
    save_skeleton(g, dir / "g.json");
    EXPECT_EQ(load_skeleton(dir / "g.json"), g);
  }
  const auto map = load_semantic_map(test::data_dir() / "toy_correspondence.json");
  save_semantic_map(map, dir / "m.json");
  const auto again = load_semantic_map(dir / "m.json");
  ASSERT_EQ(again.size(), map.size());
  for (std::size_t i = 0; i < map.size(); ++i) EXPECT_EQ(again[i].joint_b, map[i].joint_b);
}

TEST(Skeleton, LoadReportsParseErrors) {
  const auto dir = test::scratch_dir("skeleton_bad");
  EXPECT_EQ(code_of([&] { load_skeleton(dir / "missing.json"); }), ErrorCode::ParseError);
  {
    std::ofstream(dir / "bad.json") << "{ not json";
  }
  EXPECT_EQ(code_of([&] { load_skeleton(dir / "bad.json"); }), ErrorCode::ParseError);
}
