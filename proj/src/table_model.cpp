#include "peqa/table_model.hpp"

#include <optional>
#include <string>

#include "peqa/error.hpp"
#include "peqa/text_util.hpp"

namespace peqa {
namespace {

std::string Where(const char* section, std::size_t row, std::size_t index) {
  return std::string(section) + " row " + std::to_string(row) + ", cell " +
         std::to_string(index);
}

OccupancyGrid ResolveSection(const std::vector<CellRow>& rows,
                             std::size_t width, const char* section) {
  using Slot = std::optional<CellRef>;
  std::vector<std::vector<Slot>> grid(rows.size(), std::vector<Slot>(width));

  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::size_t col = 0;
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      const Cell& cell = rows[r][i];
      if (cell.colspan < 1 || cell.rowspan < 1) {
        throw Error(ErrorKind::kSpanOutOfBounds,
                    Where(section, r, i) + ": spans must be positive");
      }
      while (col < width && grid[r][col].has_value()) ++col;
      const auto cs = static_cast<std::size_t>(cell.colspan);
      const auto rs = static_cast<std::size_t>(cell.rowspan);
      if (col + cs > width) {
        throw Error(ErrorKind::kSpanOutOfBounds,
                    Where(section, r, i) + ": columns " + std::to_string(col) +
                        ".." + std::to_string(col + cs - 1) +
                        " exceed grid width " + std::to_string(width));
      }
      if (r + rs > rows.size()) {
        throw Error(ErrorKind::kSpanOutOfBounds,
                    Where(section, r, i) + ": rowspan " +
                        std::to_string(rs) + " runs past the last " + section +
                        " row");
      }
      for (std::size_t dr = 0; dr < rs; ++dr) {
        for (std::size_t dc = 0; dc < cs; ++dc) {
          auto& slot = grid[r + dr][col + dc];
          if (slot.has_value()) {
            throw Error(ErrorKind::kOverlappingSpans,
                        Where(section, r, i) + " overlaps " +
                            Where(section, slot->row, slot->index));
          }
          slot = CellRef{r, i};
        }
      }
      col += cs;
    }
  }

  OccupancyGrid out;
  out.slots.resize(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.slots[r].reserve(width);
    for (std::size_t c = 0; c < width; ++c) {
      if (!grid[r][c].has_value()) {
        throw Error(ErrorKind::kRaggedGrid,
                    std::string(section) + " row " + std::to_string(r) +
                        " leaves column " + std::to_string(c) +
                        " uncovered (grid width " + std::to_string(width) +
                        ")");
      }
      out.slots[r].push_back(*grid[r][c]);
    }
  }
  return out;
}

void NormalizeRows(std::vector<CellRow>& rows) {
  for (auto& row : rows) {
    for (auto& cell : row) cell.text = NormalizeCellText(cell.text);
  }
}

}  // namespace

ValidatedTable ValidateTable(const HierarchicalTable& raw) {
  if (raw.header_rows.empty()) {
    throw Error(ErrorKind::kRaggedGrid, "table has no header rows");
  }
  std::size_t width = 0;
  for (const Cell& cell : raw.header_rows.front()) {
    if (cell.colspan < 1 || cell.rowspan < 1) {
      throw Error(ErrorKind::kSpanOutOfBounds,
                  "header row 0: spans must be positive");
    }
    width += static_cast<std::size_t>(cell.colspan);
  }
  if (width == 0) {
    throw Error(ErrorKind::kRaggedGrid, "first header row is empty");
  }

  ValidatedTable out;
  out.table_ = raw;
  out.table_.title = NormalizeCellText(raw.title);
  NormalizeRows(out.table_.header_rows);
  NormalizeRows(out.table_.body_rows);
  out.width_ = width;
  out.header_grid_ = ResolveSection(out.table_.header_rows, width, "header");
  out.body_grid_ = ResolveSection(out.table_.body_rows, width, "body");
  return out;
}

HierarchicalTable ToHierarchical(const RegularTable& table) {
  HierarchicalTable out;
  out.title = table.title;
  CellRow header;
  for (const auto& name : table.header) header.push_back(Cell{name, 1, 1});
  out.header_rows.push_back(std::move(header));
  for (const auto& row : table.rows) {
    CellRow cells;
    for (const auto& value : row) cells.push_back(Cell{value, 1, 1});
    out.body_rows.push_back(std::move(cells));
  }
  return out;
}

}  // namespace peqa
