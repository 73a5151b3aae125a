#include "peqa/linearizer.hpp"

#include <optional>
#include <string>

#include "peqa/error.hpp"

namespace peqa {

FlatHeader FlattenHeaders(const ValidatedTable& table) {
  const OccupancyGrid& grid = table.header_grid();
  FlatHeader out;
  out.keys.reserve(table.width());
  for (std::size_t c = 0; c < table.width(); ++c) {
    // Distinct owners of this column, top-down; a rowspan repeats its owner.
    std::vector<std::string> levels;
    std::optional<CellRef> previous;
    for (std::size_t r = 0; r < grid.rows(); ++r) {
      const CellRef owner = grid.slots[r][c];
      if (previous == owner) continue;
      previous = owner;
      const std::string& text = table.header_cell(owner).text;
      if (!text.empty()) levels.push_back(text);
    }
    std::string name;
    for (auto it = levels.rbegin(); it != levels.rend(); ++it) {
      name = name.empty() ? *it : *it + "(" + name + ")";
    }
    out.keys.push_back(std::move(name));
  }
  return out;
}

RegularTable ExpandBody(const ValidatedTable& table) {
  RegularTable out;
  out.title = table.table().title;
  out.header = FlattenHeaders(table).keys;
  const OccupancyGrid& grid = table.body_grid();
  out.rows.reserve(grid.rows());
  for (const auto& slots : grid.slots) {
    std::vector<std::string> row;
    row.reserve(slots.size());
    for (const CellRef& ref : slots) row.push_back(table.body_cell(ref).text);
    out.rows.push_back(std::move(row));
  }
  return out;
}

FlattenedTableText SerializeRowMajor(const RegularTable& table) {
  FlattenedTableText out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    if (i > 0) out.text += kRowSep;
    const auto& row = table.rows[i];
    if (row.size() != table.width()) {
      throw Error(ErrorKind::kRaggedGrid,
                  "regular table row " + std::to_string(i) + " has " +
                      std::to_string(row.size()) + " cells, header has " +
                      std::to_string(table.width()));
    }
    for (std::size_t j = 0; j < table.width(); ++j) {
      if (j > 0) out.text += kPairSep;
      out.text += table.header[j];
      out.text += kKeyValueSep;
      out.text += row[j];
      ++out.pair_count;
    }
  }
  return out;
}

FlattenedTableText Linearize(const HierarchicalTable& table) {
  return SerializeRowMajor(ExpandBody(ValidateTable(table)));
}

}  // namespace peqa
