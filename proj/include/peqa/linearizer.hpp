#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "peqa/table_model.hpp"

namespace peqa {

inline constexpr char kKeyValueSep[] = ": ";
inline constexpr char kPairSep[] = ", ";
inline constexpr char kRowSep[] = " ; ";

// One column name per grid column. Stacked header levels nest as
// "upper(lower)", e.g. "a(b(c))".
struct FlatHeader {
  std::vector<std::string> keys;
};

struct FlattenedTableText {
  std::string text;
  std::size_t pair_count = 0;
};

FlatHeader FlattenHeaders(const ValidatedTable& table);

// Copies every body cell into each grid position it covers and pairs the
// result with the flattened header.
RegularTable ExpandBody(const ValidatedTable& table);

// Row-major "key: value" pairs; pairs joined by ", ", rows by " ; ".
FlattenedTableText SerializeRowMajor(const RegularTable& table);

// ValidateTable, then FlattenHeaders + ExpandBody, then SerializeRowMajor.
FlattenedTableText Linearize(const HierarchicalTable& table);

}  // namespace peqa
