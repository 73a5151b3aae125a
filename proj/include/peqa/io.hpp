#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace peqa {

// All throw Error(kIoError) on failure.
std::string ReadFile(const std::filesystem::path& path);
// A trailing newline does not produce an extra empty line; "\r\n" is accepted.
std::vector<std::string> ReadLines(const std::filesystem::path& path);
void WriteFile(const std::filesystem::path& path, std::string_view contents);

}  // namespace peqa

#include "json.hpp"

namespace peqa {

// Serializes with invalid UTF-8 replaced rather than throwing.
template <typename Json>
std::string DumpJson(const Json& j, int indent = -1) {
  return j.dump(indent, ' ', false, Json::error_handler_t::replace);
}

}  // namespace peqa
