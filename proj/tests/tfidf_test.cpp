#include <gtest/gtest.h>

#include <cmath>

#include "chatcad/error.hpp"
#include "chatcad/tfidf.hpp"
#include "chatcad/text.hpp"

using namespace chatcad;

TEST(TermCount, SingleAndMultiWord) {
  EXPECT_EQ(term_count("effusion", {"pleural", "effusion", "effusion"}), 2u);
  EXPECT_EQ(term_count("pleural effusion", {"pleural", "effusion", "pleural", "effusion"}), 2u);
  EXPECT_EQ(term_count("edema", {}), 0u);
}

TEST(TermSet, NormalizesAndRejectsDuplicates) {
  TermSet t({"Pleural  Effusion", "edema"});
  EXPECT_EQ(t.terms()[0], "pleural effusion");
  EXPECT_THROW(TermSet({"edema", "EDEMA"}), Error);
  EXPECT_THROW(TermSet(std::vector<std::string>{}), Error);
  EXPECT_THROW(TermSet({"--"}), Error);
  EXPECT_EQ(TermSet::default_thoracic().size(), 17u);
}

// Frozen from tests/oracle/tfidf_oracle.py.
TEST(ComputeTie, ThreeDocumentExample) {
  const TermSet terms({"effusion", "cardiomegaly"});
  const auto stats = stats_from_doc_freq(3, {2, 1});
  const auto d1 = compute_tie("effusion effusion present", stats, terms);
  const auto d2 = compute_tie("no effusion", stats, terms);
  const auto d3 = compute_tie("cardiomegaly noted", stats, terms);
  EXPECT_NEAR(d1[0], 0.27031007207210955, 1e-12);
  EXPECT_EQ(d1[1], 0.0);
  EXPECT_NEAR(d2[0], 0.20273255405408219, 1e-12);
  EXPECT_EQ(d3[0], 0.0);
  EXPECT_NEAR(d3[1], 0.54930614433405489, 1e-12);
}

TEST(ComputeTie, ZeroCases) {
  const TermSet terms({"effusion", "cardiomegaly"});
  const auto stats = stats_from_doc_freq(3, {2, 0});
  EXPECT_TRUE(is_zero(compute_tie("nothing relevant here", stats, terms)));
  EXPECT_TRUE(is_zero(compute_tie("", stats, terms)));
  // df = 0 gives idf 0, so the term never contributes
  EXPECT_EQ(stats.idf[1], 0.0);
  EXPECT_EQ(compute_tie("cardiomegaly cardiomegaly", stats, terms)[1], 0.0);
}

TEST(SphericalProject, Normalizes) {
  const auto p = spherical_project(std::vector<double>{3.0, 4.0});
  EXPECT_DOUBLE_EQ(p[0], 0.6);
  EXPECT_DOUBLE_EQ(p[1], 0.8);
  try {
    (void)spherical_project(std::vector<double>{0.0, 0.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroEmbedding);
  }
}
