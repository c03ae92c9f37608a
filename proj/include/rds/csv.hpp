#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rds::csv {

// Splits one CSV record. Handles double-quoted fields with "" escapes;
// embedded newlines are not supported.
std::vector<std::string> split_line(std::string_view line);

// Strict full-cell parse; surrounding blanks are ignored. "nan"/"inf" parse
// (and are rejected by callers that require finite values).
std::optional<double> parse_double(std::string_view cell);

// Shortest round-trippable decimal text for a double.
std::string format_double(double value);

}  // namespace rds::csv
