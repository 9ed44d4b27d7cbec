#include <gtest/gtest.h>

#include <fstream>

#include "omgpt/error.hpp"
#include "omgpt/textembed.hpp"
#include "support.hpp"

using namespace omgpt;

TEST(TextEmbed, TokenizeNormalises) {
  EXPECT_EQ(tokenize("A Person, walks!  forward."), (std::vector<std::string>{"a", "person", "walks", "forward"}));
}

TEST(TextEmbed, UnitNormAndDeterministic) {
  const auto e = embed("a person walks forward");
  ASSERT_EQ(e.vector.size(), kDefaultClipDim);
  double n = 0;
  for (double x : e.vector) n += x * x;
  EXPECT_NEAR(n, 1.0, 1e-12);
  EXPECT_EQ(embed("a person walks forward").vector, e.vector);
  EXPECT_EQ(embed("A person walks forward.").vector, e.vector);
  EXPECT_NE(embed("a person walks forward", 1).vector, e.vector);
  EXPECT_THROW(embed("  ,. "), Error);
}

TEST(TextEmbed, SharedWordsRaiseSimilarity) {
  const auto a = embed("a dog jumps over the fence");
  const auto b = embed("a cat jumps over the fence");
  const auto c = embed("someone sits quietly");
  EXPECT_GT(cosine(a.vector, b.vector), cosine(a.vector, c.vector) + 0.3);
  EXPECT_NEAR(cosine(a.vector, a.vector), 1.0, 1e-12);
}

TEST(TextEmbed, SubjectSwapReplacesLongestSubject) {
  EXPECT_EQ(subject_swap("a person walks in a circle", "dog"), "a dog walks in a circle");
  EXPECT_EQ(subject_swap("The person jumps", "horse"), "a horse jumps");
  EXPECT_THROW(subject_swap("walks in a circle", "dog"), Error);
}

TEST(TextEmbed, TableLookupAndErrors) {
  const auto dir = test::scratch_dir("embed_table");
  {
    std::ofstream out(dir / "t.tsv");
    out << "a dog runs\t1 0 0\n";
    out << "a cat sits\t0 0.5 0.5\n";
  }
  const auto table = EmbeddingTable::load(dir / "t.tsv", 3);
  EXPECT_EQ(table.size(), 2u);
  EXPECT_EQ(table.embed("a dog runs").vector, (std::vector<double>{1, 0, 0}));
  EXPECT_THROW(table.embed("a cow moos"), Error);
  try {
    EmbeddingTable::load(dir / "t.tsv", 4);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}
