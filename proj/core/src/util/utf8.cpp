#include "corpusforge/util/utf8.hpp"

namespace corpusforge::utf8 {
namespace {

// Decodes one code point at text[pos]. Returns the byte length consumed, or 0
// if the sequence is invalid.
std::size_t decode(std::string_view text, std::size_t pos, char32_t& cp) {
  const auto b0 = static_cast<unsigned char>(text[pos]);
  if (b0 < 0x80) {
    cp = b0;
    return 1;
  }
  std::size_t len = 0;
  char32_t min = 0;
  if ((b0 & 0xe0) == 0xc0) {
    len = 2;
    cp = b0 & 0x1f;
    min = 0x80;
  } else if ((b0 & 0xf0) == 0xe0) {
    len = 3;
    cp = b0 & 0x0f;
    min = 0x800;
  } else if ((b0 & 0xf8) == 0xf0) {
    len = 4;
    cp = b0 & 0x07;
    min = 0x10000;
  } else {
    return 0;
  }
  if (pos + len > text.size()) return 0;
  for (std::size_t i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(text[pos + i]);
    if ((b & 0xc0) != 0x80) return 0;
    cp = (cp << 6) | (b & 0x3f);
  }
  if (cp < min || cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) return 0;
  return len;
}

}  // namespace

bool is_valid(std::string_view text) {
  std::size_t pos = 0;
  char32_t cp = 0;
  while (pos < text.size()) {
    const std::size_t len = decode(text, pos, cp);
    if (len == 0) return false;
    pos += len;
  }
  return true;
}

bool is_space(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0a: case 0x0b: case 0x0c: case 0x0d: case 0x20:
    case 0x85: case 0xa0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202f: case 0x205f: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200a;
  }
}

std::vector<Span> split_whitespace(std::string_view text) {
  std::vector<Span> out;
  std::size_t pos = 0;
  std::size_t start = 0;
  bool in_token = false;
  while (pos < text.size()) {
    char32_t cp = 0;
    std::size_t len = decode(text, pos, cp);
    bool space = false;
    if (len == 0) {
      len = 1;
    } else {
      space = is_space(cp);
    }
    if (space) {
      if (in_token) out.push_back({start, pos - start});
      in_token = false;
    } else if (!in_token) {
      start = pos;
      in_token = true;
    }
    pos += len;
  }
  if (in_token) out.push_back({start, pos - start});
  return out;
}

std::string ascii_lower(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (const Span& s : split_whitespace(text)) {
    if (!out.empty()) out.push_back(' ');
    out += ascii_lower(text.substr(s.offset, s.length));
  }
  return out;
}

}  // namespace corpusforge::utf8
