#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace corpusforge::io {

/// The unit that flows through every stage.
struct Document {
  std::string id;
  std::string text;
  std::map<std::string, std::string> meta;
  std::optional<std::uint64_t> token_count;

  friend bool operator==(const Document&, const Document&) = default;
};

/// Serializes to one JSON line (no trailing newline). Fields: id, text,
/// meta (omitted when empty), token_count (omitted when unset).
std::string to_record(const Document& doc);

/// Parses one record. Returns nullopt for anything malformed: invalid JSON
/// or UTF-8, missing/empty id, non-string text, non-object meta.
std::optional<Document> parse_record(std::string_view line);

}  // namespace corpusforge::io
