#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace stopdeck {

// Shortest decimal text that parses back to the identical double.
std::string format_double(double v);

// Whole-string parses; throw ConfigError on trailing junk or overflow.
double parse_double(std::string_view text);
std::int64_t parse_int(std::string_view text);
std::uint64_t parse_uint(std::string_view text);
bool parse_bool(std::string_view text);

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view text);

}  // namespace stopdeck
