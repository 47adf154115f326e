#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rayreg::text {

/// Shortest decimal form that parses back to the same double. Locale independent.
std::string format_double(double v);

/// Full-string parse of a decimal number; nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

std::string_view trim(std::string_view s);

/// Splits on a single delimiter character; empty fields are kept.
std::vector<std::string_view> split(std::string_view s, char delim);

/// Splits on any run of whitespace and/or commas; empty fields are dropped.
std::vector<std::string_view> split_grid_row(std::string_view s);

/// Splits text into lines, stripping a trailing '\r'.
std::vector<std::string_view> lines(std::string_view s);

}  // namespace rayreg::text
