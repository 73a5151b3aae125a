#include "peqa/input_assembly.hpp"

#include <gtest/gtest.h>

#include <random>

#include "peqa/error.hpp"

namespace peqa {
namespace {

ErrorKind KindOf(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorKind::kIoError;
}

// Splits on the literal marker strings without going through the library.
std::vector<std::string> NaiveSplit(const std::string& s) {
  const std::string q = "<question> ", t = " <title>", c = " <context>";
  const auto tpos = s.find(t);
  const auto cpos = s.find(c);
  auto trim = [](std::string x) {
    if (!x.empty() && x.front() == ' ') x.erase(0, 1);
    return x;
  };
  return {s.substr(q.size(), tpos - q.size()), trim(s.substr(tpos + t.size(), cpos - tpos - t.size())),
          trim(s.substr(cpos + c.size()))};
}

TEST(Assemble, Format) {
  const InputSequence s = Assemble("who won", "Final", "Year: 2013");
  EXPECT_EQ(s.rendered(), "<question> who won <title> Final <context> Year: 2013");
  EXPECT_EQ(s.token_count(), 8u);
}

TEST(Assemble, EmptyTitleKeepsMarker) {
  const InputSequence s = Assemble("q", "", "c");
  EXPECT_EQ(s.rendered(), "<question> q <title> <context> c");
  EXPECT_TRUE(s.title_tokens.empty());
}

TEST(Assemble, CollapsesWhitespace) {
  EXPECT_EQ(Assemble("  a\t b ", "", "").rendered(), "<question> a b <title> <context>");
}

TEST(Assemble, Errors) {
  EXPECT_EQ(KindOf([] { Assemble(" \n", "t", "c"); }), ErrorKind::kEmptyQuestion);
  EXPECT_EQ(KindOf([] { Assemble("q", "a <context> b", "c"); }), ErrorKind::kReservedToken);
}

TEST(Assemble, RoundTrip) {
  std::mt19937 rng(17);
  const std::vector<std::string> words{"a", "bb", "Year:", "2013,", ";", "x(y)", "<q>"};
  auto phrase = [&](int min_len) {
    const int n = std::uniform_int_distribution<int>(min_len, 6)(rng);
    std::string s;
    for (int i = 0; i < n; ++i)
      s += (i ? " " : "") + words[std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng)];
    return s;
  };
  for (int trial = 0; trial < 300; ++trial) {
    const std::string q = phrase(1), t = phrase(0), c = phrase(0);
    const InputSequence s = Assemble(q, t, c);
    const SplitFields f = SplitRendered(s.rendered());
    EXPECT_EQ(f.question, q);
    EXPECT_EQ(f.title, t);
    EXPECT_EQ(f.context, c);
    EXPECT_EQ(NaiveSplit(s.rendered()), (std::vector<std::string>{q, t, c}));
  }
}

TEST(SplitRendered, RejectsMalformed) {
  EXPECT_EQ(KindOf([] { SplitRendered("q <title> t <context> c"); }), ErrorKind::kSchemaError);
  EXPECT_EQ(KindOf([] { SplitRendered("<question> q <context> c <title> t"); }),
            ErrorKind::kSchemaError);
}

TEST(Truncate, WithinBudgetUnchanged) {
  const InputSequence s = Assemble("q", "t", "a b c");
  EXPECT_EQ(Truncate(s, s.token_count()), s);
  EXPECT_EQ(Truncate(s, 100), s);
}

TEST(Truncate, BudgetEqualToFixedPart) {
  const InputSequence s = Assemble("q r", "t", "a b c");
  const InputSequence out = Truncate(s, 6);
  EXPECT_TRUE(out.context_tokens.empty());
  EXPECT_EQ(out.rendered(), "<question> q r <title> t <context>");
}

TEST(Truncate, BudgetTooSmall) {
  const InputSequence s = Assemble("q r", "t", "a");
  EXPECT_EQ(KindOf([&] { Truncate(s, 5); }), ErrorKind::kBudgetTooSmall);
}

TEST(Truncate, RandomLengthAndPrefix) {
  std::mt19937 rng(29);
  for (int trial = 0; trial < 300; ++trial) {
    InputSequence s;
    s.question_tokens.assign(std::uniform_int_distribution<int>(1, 4)(rng), "q");
    s.title_tokens.assign(std::uniform_int_distribution<int>(0, 3)(rng), "t");
    const int n_ctx = std::uniform_int_distribution<int>(0, 20)(rng);
    for (int i = 0; i < n_ctx; ++i) s.context_tokens.push_back("c" + std::to_string(i));
    const std::size_t fixed = s.token_count() - s.context_tokens.size();
    const std::size_t budget = std::uniform_int_distribution<std::size_t>(fixed, fixed + 25)(rng);

    const InputSequence out = Truncate(s, budget);
    ASSERT_LE(out.token_count(), budget);
    ASSERT_EQ(out.token_count(), std::min(budget, s.token_count()));
    ASSERT_EQ(out.question_tokens, s.question_tokens);
    ASSERT_EQ(out.title_tokens, s.title_tokens);
    ASSERT_TRUE(std::equal(out.context_tokens.begin(), out.context_tokens.end(),
                           s.context_tokens.begin()));
    ASSERT_EQ(Truncate(out, budget), out);
  }
}

}  // namespace
}  // namespace peqa
