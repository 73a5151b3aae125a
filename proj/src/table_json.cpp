#include "peqa/table_json.hpp"

#include <string>

#include "peqa/error.hpp"

namespace peqa {
namespace {

[[noreturn]] void Schema(const std::string& message) {
  throw Error(ErrorKind::kSchemaError, message);
}

int ReadSpan(const nlohmann::json& cell, const char* key,
             const std::string& where) {
  auto it = cell.find(key);
  if (it == cell.end()) return 1;
  if (!it->is_number_integer()) Schema(where + ": '" + key + "' must be an integer");
  const auto value = it->get<long long>();
  if (value < 1) Schema(where + ": '" + key + "' must be >= 1");
  if (value > 1'000'000) Schema(where + ": '" + key + "' is implausibly large");
  return static_cast<int>(value);
}

std::vector<CellRow> ReadRows(const nlohmann::json& j, const char* key,
                              bool required) {
  std::vector<CellRow> rows;
  auto it = j.find(key);
  if (it == j.end()) {
    if (required) Schema(std::string("missing '") + key + "'");
    return rows;
  }
  if (!it->is_array()) Schema(std::string("'") + key + "' must be an array");
  for (std::size_t r = 0; r < it->size(); ++r) {
    const auto& row = (*it)[r];
    if (!row.is_array()) {
      Schema(std::string(key) + "[" + std::to_string(r) + "] must be an array");
    }
    CellRow cells;
    for (std::size_t i = 0; i < row.size(); ++i) {
      const std::string where =
          std::string(key) + "[" + std::to_string(r) + "][" + std::to_string(i) + "]";
      const auto& c = row[i];
      Cell cell;
      if (c.is_string()) {
        cell.text = c.get<std::string>();
      } else if (c.is_object()) {
        auto text = c.find("text");
        if (text == c.end() || !text->is_string()) {
          Schema(where + ": 'text' must be a string");
        }
        cell.text = text->get<std::string>();
        cell.colspan = ReadSpan(c, "colspan", where);
        cell.rowspan = ReadSpan(c, "rowspan", where);
      } else {
        Schema(where + ": cell must be an object or a string");
      }
      cells.push_back(std::move(cell));
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

nlohmann::json RowsToJson(const std::vector<CellRow>& rows) {
  auto out = nlohmann::json::array();
  for (const auto& row : rows) {
    auto cells = nlohmann::json::array();
    for (const auto& cell : row) {
      cells.push_back({{"text", cell.text},
                       {"colspan", cell.colspan},
                       {"rowspan", cell.rowspan}});
    }
    out.push_back(std::move(cells));
  }
  return out;
}

}  // namespace

HierarchicalTable TableFromJson(const nlohmann::json& j) {
  if (!j.is_object()) Schema("table must be a JSON object");
  HierarchicalTable table;
  if (auto it = j.find("title"); it != j.end()) {
    if (!it->is_string()) Schema("'title' must be a string");
    table.title = it->get<std::string>();
  }
  table.header_rows = ReadRows(j, "header_rows", /*required=*/true);
  table.body_rows = ReadRows(j, "body_rows", /*required=*/false);
  return table;
}

nlohmann::json TableToJson(const HierarchicalTable& table) {
  return {{"title", table.title},
          {"header_rows", RowsToJson(table.header_rows)},
          {"body_rows", RowsToJson(table.body_rows)}};
}

}  // namespace peqa
