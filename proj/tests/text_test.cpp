#include <gtest/gtest.h>

#include "chatcad/text.hpp"

using namespace chatcad;
using V = std::vector<std::string>;

TEST(Tokenize, Rules) {
  EXPECT_EQ(tokenize("Pleural effusion, small."), (V{"pleural", "effusion", "small"}));
  EXPECT_EQ(tokenize(""), V{});
  EXPECT_EQ(tokenize("X-ray x RAY"), (V{"x", "ray", "x", "ray"}));
  EXPECT_EQ(tokenize("  --  "), V{});
  EXPECT_EQ(tokenize("T12 L1"), (V{"t12", "l1"}));
}

TEST(CountPhrase, NonOverlappingLeftToRight) {
  EXPECT_EQ(count_phrase({"a", "a"}, {"a", "a", "a"}), 1u);
  EXPECT_EQ(count_phrase({"a", "a"}, {"a", "a", "a", "a"}), 2u);
  EXPECT_EQ(count_phrase({"a", "b"}, {}), 0u);
}

TEST(SplitSentences, Punctuation) {
  const auto s = split_sentences("No edema. Cardiomegaly; effusion\nok");
  ASSERT_EQ(s.size(), 4u);
  EXPECT_EQ(s[1], " Cardiomegaly");
}
