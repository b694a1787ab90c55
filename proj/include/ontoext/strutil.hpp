#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ontoext {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

// Trims and squeezes every whitespace run to a single space.
std::string collapse_ws(std::string_view s);

std::vector<std::string> split_ws(std::string_view s);

// Drops non-alphanumeric characters from both ends of a token; interior
// punctuation (hyphens, apostrophes) is kept.
std::string strip_token_edges(std::string_view token);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool icontains(std::string_view haystack, std::string_view needle);

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t value);

}  // namespace ontoext
