#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

namespace termclust::utf8 {

/// Byte offsets of each code point start, plus a final entry at s.size().
/// Returns nullopt on malformed UTF-8.
std::optional<std::vector<std::size_t>> boundaries(std::string_view s);

inline bool valid(std::string_view s) { return boundaries(s).has_value(); }

}  // namespace termclust::utf8
