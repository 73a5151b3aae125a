#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace peqa {

struct Cell {
  std::string text;
  int colspan = 1;
  int rowspan = 1;
};

using CellRow = std::vector<Cell>;

// A table as authored in markup: each row lists only the cells that start in
// it, and spans from earlier rows implicitly occupy later ones.
struct HierarchicalTable {
  std::string title;
  std::vector<CellRow> header_rows;
  std::vector<CellRow> body_rows;
};

// A table whose every cell is logically 1x1 under a single header row.
struct RegularTable {
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t width() const { return header.size(); }
};

// Identifies the markup cell that owns a grid position: the cell at
// `index` within markup row `row` of its section.
struct CellRef {
  std::size_t row = 0;
  std::size_t index = 0;

  friend bool operator==(const CellRef&, const CellRef&) = default;
};

// Resolved occupancy of one section (header or body): grid[r][c] names the
// owning cell of grid position (r, c).
struct OccupancyGrid {
  std::vector<std::vector<CellRef>> slots;

  std::size_t rows() const { return slots.size(); }
};

// A table that passed span resolution. Cell texts are normalized; the raw
// markup rows are kept so grid references stay meaningful.
class ValidatedTable {
 public:
  const HierarchicalTable& table() const { return table_; }
  const OccupancyGrid& header_grid() const { return header_grid_; }
  const OccupancyGrid& body_grid() const { return body_grid_; }
  std::size_t width() const { return width_; }

  const Cell& header_cell(CellRef ref) const {
    return table_.header_rows[ref.row][ref.index];
  }
  const Cell& body_cell(CellRef ref) const {
    return table_.body_rows[ref.row][ref.index];
  }

 private:
  friend ValidatedTable ValidateTable(const HierarchicalTable& raw);

  HierarchicalTable table_;
  OccupancyGrid header_grid_;
  OccupancyGrid body_grid_;
  std::size_t width_ = 0;
};

// Resolves row/column spans. Cells fill the leftmost free column of their
// starting row. The grid width is the summed colspan of the first header row.
// Throws Error with kOverlappingSpans, kRaggedGrid or kSpanOutOfBounds.
ValidatedTable ValidateTable(const HierarchicalTable& raw);

// Wraps a regular table as a hierarchical one with 1x1 spans.
HierarchicalTable ToHierarchical(const RegularTable& table);

}  // namespace peqa
