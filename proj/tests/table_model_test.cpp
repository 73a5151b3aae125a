#include "peqa/table_model.hpp"

#include <gtest/gtest.h>

#include <random>

#include "peqa/error.hpp"
#include "peqa/table_json.hpp"
#include "table_oracle.hpp"

namespace peqa {
namespace {

Cell C(std::string text, int colspan = 1, int rowspan = 1) {
  return Cell{std::move(text), colspan, rowspan};
}

ErrorKind KindOf(const HierarchicalTable& t) {
  try {
    ValidateTable(t);
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected a validation error";
  return ErrorKind::kIoError;
}

TEST(ValidateTable, RegularTable) {
  HierarchicalTable t{"t", {{C("a"), C("b")}}, {{C("1"), C("2")}}};
  const ValidatedTable v = ValidateTable(t);
  EXPECT_EQ(v.width(), 2u);
  EXPECT_EQ(v.body_grid().rows(), 1u);
  EXPECT_EQ(v.body_grid().slots[0][1], (CellRef{0, 1}));
}

TEST(ValidateTable, MultiSpanHeader) {
  HierarchicalTable t{"", {{C("a", 2), C("b", 1, 2), C("e")}, {C("d", 2), C("f")}}, {}};
  const ValidatedTable v = ValidateTable(t);
  EXPECT_EQ(v.width(), 4u);
  const auto& g = v.header_grid().slots;
  // Row 1: d d b f
  EXPECT_EQ(g[1][0], (CellRef{1, 0}));
  EXPECT_EQ(g[1][1], (CellRef{1, 0}));
  EXPECT_EQ(g[1][2], (CellRef{0, 1}));
  EXPECT_EQ(g[1][3], (CellRef{1, 1}));
}

TEST(ValidateTable, BodySpanWiderThanGrid) {
  HierarchicalTable t{"", {{C("a"), C("b")}}, {{C("x", 3)}}};
  EXPECT_EQ(KindOf(t), ErrorKind::kSpanOutOfBounds);
}

TEST(ValidateTable, RowspanPastLastRow) {
  HierarchicalTable t{"", {{C("a"), C("b")}}, {{C("x", 1, 2), C("y")}}};
  EXPECT_EQ(KindOf(t), ErrorKind::kSpanOutOfBounds);
}

TEST(ValidateTable, ShortRowIsRagged) {
  HierarchicalTable t{"", {{C("a"), C("b"), C("c")}}, {{C("1"), C("2")}}};
  EXPECT_EQ(KindOf(t), ErrorKind::kRaggedGrid);
}

TEST(ValidateTable, OverlapWithRowspanFromAbove) {
  // Row 0: x spans rows 0-1 in column 1. Row 1 places a colspan-2 cell at
  // column 0, which runs into x.
  HierarchicalTable t{"",
                      {{C("a"), C("b"), C("c")}},
                      {{C("1"), C("x", 1, 2), C("3")}, {C("y", 2), C("z")}}};
  EXPECT_EQ(KindOf(t), ErrorKind::kOverlappingSpans);
}

TEST(ValidateTable, EmptyHeaderIsRejected) {
  EXPECT_EQ(KindOf(HierarchicalTable{"", {}, {}}), ErrorKind::kRaggedGrid);
  EXPECT_EQ(KindOf(HierarchicalTable{"", {{}}, {}}), ErrorKind::kRaggedGrid);
}

TEST(ValidateTable, NonPositiveSpan) {
  EXPECT_EQ(KindOf(HierarchicalTable{"", {{C("a"), C("b")}}, {{C("1", 0), C("2")}}}),
            ErrorKind::kSpanOutOfBounds);
}

TEST(ValidateTable, NormalizesText) {
  HierarchicalTable t{"  My \t title ", {{C("  a \n b  "), C("")}}, {{C("x\x01y"), C("2")}}};
  const ValidatedTable v = ValidateTable(t);
  EXPECT_EQ(v.table().title, "My title");
  EXPECT_EQ(v.table().header_rows[0][0].text, "a b");
  EXPECT_EQ(v.table().header_rows[0][1].text, "");
  EXPECT_EQ(v.table().body_rows[0][0].text, "x y");
}

// Sum of cell areas equals rows x width, and every grid position maps back to
// the rectangle the generator painted there.
TEST(ValidateTable, RandomTablesMatchPaintedGrid) {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    const auto painted = testing::RandomTable(rng);
    const ValidatedTable v = ValidateTable(painted.table);
    ASSERT_EQ(v.width(), static_cast<std::size_t>(painted.width));

    std::size_t area = 0;
    for (const auto& row : painted.table.body_rows)
      for (const auto& cell : row) area += static_cast<std::size_t>(cell.rowspan * cell.colspan);
    EXPECT_EQ(area, v.body_grid().rows() * v.width());

    for (std::size_t r = 0; r < v.body_grid().rows(); ++r)
      for (std::size_t c = 0; c < v.width(); ++c)
        ASSERT_EQ(v.body_cell(v.body_grid().slots[r][c]).text, painted.body.painted[r][c]);
  }
}

TEST(ValidateTable, Deterministic) {
  std::mt19937 rng(7);
  const auto painted = testing::RandomTable(rng);
  const ValidatedTable a = ValidateTable(painted.table);
  const ValidatedTable b = ValidateTable(painted.table);
  EXPECT_EQ(a.header_grid().slots, b.header_grid().slots);
  EXPECT_EQ(a.body_grid().slots, b.body_grid().slots);
}

TEST(TableJson, DefaultsSpansAndRejectsBadFields) {
  const auto j = nlohmann::json::parse(R"({
    "title": "T",
    "header_rows": [[{"text": "a", "colspan": 2}, {"text": "b"}]],
    "body_rows": [[{"text": "1"}, {"text": "2"}, "3"]]
  })");
  const HierarchicalTable t = TableFromJson(j);
  EXPECT_EQ(t.header_rows[0][0].colspan, 2);
  EXPECT_EQ(t.header_rows[0][1].rowspan, 1);
  EXPECT_EQ(t.body_rows[0][2].text, "3");
  EXPECT_EQ(ValidateTable(t).width(), 3u);

  auto bad = nlohmann::json::parse(R"({"header_rows": [[{"text": "a", "colspan": 0}]]})");
  EXPECT_THROW(TableFromJson(bad), Error);
  EXPECT_THROW(TableFromJson(nlohmann::json::parse(R"({"title": "x"})")), Error);
}

}  // namespace
}  // namespace peqa
