#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace corpusforge::utf8 {

/// Byte range of one token inside the source text.
struct Span {
  std::size_t offset = 0;
  std::size_t length = 0;

  friend bool operator==(const Span&, const Span&) = default;
};

bool is_valid(std::string_view text);

/// True for the Unicode White_Space code points.
bool is_space(char32_t cp);

/// Splits on runs of Unicode whitespace. Invalid UTF-8 bytes are treated as
/// non-space so nothing is dropped.
std::vector<Span> split_whitespace(std::string_view text);

/// ASCII lowercasing; multi-byte sequences pass through unchanged.
std::string ascii_lower(std::string_view text);

/// Lowercase, collapse whitespace runs to a single space, trim.
std::string normalize(std::string_view text);

}  // namespace corpusforge::utf8
