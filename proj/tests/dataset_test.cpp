#include "peqa/dataset.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "peqa/error.hpp"
#include "peqa/linearizer.hpp"
#include "peqa/table_json.hpp"
#include "table_oracle.hpp"

namespace peqa {
namespace {

namespace fs = std::filesystem;

std::size_t CountTokens(const std::string& s) {
  std::istringstream in(s);
  std::size_t n = 0;
  for (std::string w; in >> w;) ++n;
  return n;
}

class DatasetFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("peqa_dataset_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path Write(const std::string& name, const std::string& text) {
    std::ofstream(dir_ / name) << text;
    return dir_ / name;
  }

  fs::path dir_;
};

constexpr char kTableLine[] =
    R"({"id":"t1","split":"dev","question":"who won in 2013","title":"Awards",)"
    R"("context":{"table":{"header_rows":[["Year","Film"]],"body_rows":[["2013","Padhe Padhe"]]}},)"
    R"("answers":["Padhe Padhe won"]})";
constexpr char kTextLine[] =
    R"({"id":"p1","question":"a b c","context":{"passage":"x y z w"},"answers":["one","two words"]})";

TEST_F(DatasetFiles, ReadsBothModalities) {
  const auto path = Write("mixed.jsonl", std::string(kTableLine) + "\n\n" + kTextLine + "\n");
  const auto records = ReadRecords(path, std::nullopt);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0].modality(), Modality::kTable);
  EXPECT_EQ(records[0].split, "dev");
  EXPECT_EQ(records[1].modality(), Modality::kText);
  EXPECT_EQ(records[1].split, "train");
  EXPECT_EQ(records[1].title, "");
}

TEST_F(DatasetFiles, ModalityFilterRejectsOthers) {
  const auto path = Write("mixed.jsonl", std::string(kTableLine) + "\n" + kTextLine + "\n");
  try {
    ReadRecords(path, Modality::kTable);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSchemaError);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST_F(DatasetFiles, SchemaErrorsNameTheLine) {
  const auto path = Write("bad.jsonl", std::string(kTextLine) + "\n" +
                                           R"({"id":"x","question":"q","context":{"passage":"p"},"answers":[]})" + "\n");
  try {
    ReadRecords(path, std::nullopt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSchemaError);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(ReadRecords(Write("junk.jsonl", "{not json\n"), std::nullopt), Error);
  EXPECT_THROW(ReadRecords(dir_ / "missing.jsonl", std::nullopt), Error);
}

TEST_F(DatasetFiles, InvalidTableKeepsItsKind) {
  const auto path = Write(
      "span.jsonl",
      R"({"id":"t","question":"q","context":{"table":{"header_rows":[["a","b"]],"body_rows":[[{"text":"x","colspan":3}]]}},"answers":["a"]})");
  try {
    ReadRecords(path, std::nullopt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSpanOutOfBounds);
  }
}

TEST(ComputeStats, SingleRecord) {
  QaRecord r;
  r.question = "a b c";
  r.context = Passage{"x"};
  r.answers = {"y"};
  const DatasetStats s = ComputeStats({r});
  EXPECT_EQ(s.splits.at("train").max_question_tokens, 3u);
  EXPECT_EQ(s.splits.at("train").n_samples, 1u);
}

TEST(ComputeStats, MatchesRescanOracleAndIgnoresOrder) {
  std::mt19937 rng(77);
  const std::vector<std::string> splits{"train", "dev", "test"};
  auto words = [&](int lo, int hi) {
    std::string s;
    const int n = std::uniform_int_distribution<int>(lo, hi)(rng);
    for (int i = 0; i < n; ++i) s += (i ? " " : "") + std::string("w") + std::to_string(i);
    return s;
  };
  std::vector<QaRecord> records;
  std::vector<std::pair<int, int>> table_shape;  // body rows, width; -1 for passages
  for (int i = 0; i < 200; ++i) {
    QaRecord r;
    r.id = std::to_string(i);
    r.split = splits[rng() % 3];
    r.question = words(1, 20);
    r.answers = {words(0, 15), words(0, 15)};
    if (rng() % 2) {
      const auto painted = testing::RandomTable(rng);
      r.context = painted.table;
      table_shape.emplace_back(static_cast<int>(painted.body.painted.size()), painted.width);
    } else {
      r.context = Passage{words(0, 60)};
      table_shape.emplace_back(-1, -1);
    }
    records.push_back(r);
  }
  // Planted maximum in the dev split.
  records[5].split = "dev";
  records[5].question = words(50, 50);

  std::map<std::string, SplitStats> oracle;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const QaRecord& r = records[i];
    SplitStats& s = oracle[r.split];
    ++s.n_samples;
    s.max_question_tokens = std::max(s.max_question_tokens, CountTokens(r.question));
    for (const auto& a : r.answers) s.max_target_tokens = std::max(s.max_target_tokens, CountTokens(a));
    const std::string ctx = table_shape[i].first < 0
                                ? std::get<Passage>(r.context).text
                                : Linearize(std::get<HierarchicalTable>(r.context)).text;
    s.max_context_tokens = std::max(s.max_context_tokens, CountTokens(ctx));
    if (table_shape[i].first >= 0) {
      s.max_table_rows = std::max<std::size_t>(s.max_table_rows, table_shape[i].first);
      s.max_table_columns = std::max<std::size_t>(s.max_table_columns, table_shape[i].second);
    }
  }
  const DatasetStats stats = ComputeStats(records);
  EXPECT_EQ(stats.splits, oracle);
  EXPECT_EQ(stats.splits.at("dev").max_question_tokens, 50u);

  std::shuffle(records.begin(), records.end(), rng);
  EXPECT_EQ(ComputeStats(records), stats);
}

TEST(PrepareExamples, OneOutputPerRecordWithLimits) {
  QaRecord table;
  table.id = "t";
  table.question = "who won";
  table.title = "Final";
  table.context = ToHierarchical(RegularTable{"", {"Year", "Film"}, {{"2013", "Padhe Padhe"}}});
  table.answers = {"first answer here", "second"};
  QaRecord text;
  text.id = "p";
  text.question = "q";
  text.context = Passage{"a b c d e f"};
  text.answers = {"x"};

  const auto out = PrepareExamples({table, text}, PrepareLimits{}, 2);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].input.rendered(),
            "<question> who won <title> Final <context> Year: 2013, Film: Padhe Padhe");
  EXPECT_EQ(out[0].target, "first answer here");

  PrepareLimits limits;
  limits.max_input_tokens = 6;
  limits.max_target_tokens = 2;
  const auto cut = PrepareExamples({table, text}, limits);
  EXPECT_EQ(cut[0].target, "first answer");
  EXPECT_EQ(cut[1].input.rendered(), "<question> q <title> <context> a b");
  EXPECT_LE(cut[0].input.token_count(), 6u);

  limits.answer_index = 1;
  EXPECT_THROW(PrepareExamples({table, text}, limits), Error);
}

TEST(PrepareExamples, JsonlFields) {
  QaRecord r;
  r.id = "p";
  r.question = "q";
  r.context = Passage{"c"};
  r.answers = {"a"};
  EXPECT_EQ(PreparedJsonl(PrepareExamples({r}, {})),
            R"({"id":"p","input":"<question> q <title> <context> c","input_tokens":5,"target":"a"})"
            "\n");
}

}  // namespace
}  // namespace peqa
