#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace peqa {

// Splits on ASCII whitespace, dropping empty pieces.
std::vector<std::string> SplitWhitespace(std::string_view text);

std::string Join(std::span<const std::string> parts, std::string_view sep);

// Trims, maps control characters to spaces and collapses whitespace runs.
std::string NormalizeCellText(std::string_view text);

// Formats 6343680 as "6,343,680".
std::string WithThousandsSeparators(long long value);

}  // namespace peqa
