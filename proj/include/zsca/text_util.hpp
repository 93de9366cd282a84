#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace zsca {

std::vector<std::string> split_tabs(std::string_view line);
std::vector<std::string> split_ws(std::string_view line);
std::vector<std::string> split_on(std::string_view line, char sep);
std::string strip_cr(std::string_view line);
std::string trim(std::string_view text);
std::string to_lower(std::string_view text);
std::optional<double> parse_double(std::string_view text);
std::optional<std::size_t> parse_size(std::string_view text);
// Shortest representation that parses back to the same double.
std::string format_double(double v);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace zsca
