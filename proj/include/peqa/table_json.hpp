#pragma once

#include "json.hpp"
#include "peqa/table_model.hpp"

namespace peqa {

// {"title": str, "header_rows": [[{"text": str, "colspan": int,
// "rowspan": int}, ...]], "body_rows": [[...]]}. Spans default to 1.
// Throws Error(kSchemaError) on malformed input.
HierarchicalTable TableFromJson(const nlohmann::json& j);

nlohmann::json TableToJson(const HierarchicalTable& table);

}  // namespace peqa
