#include "corpusforge/io/document.hpp"

#include <nlohmann/json.hpp>

#include "corpusforge/util/utf8.hpp"

namespace corpusforge::io {

using json = nlohmann::json;

std::string to_record(const Document& doc) {
  json j;
  j["id"] = doc.id;
  j["text"] = doc.text;
  if (!doc.meta.empty()) j["meta"] = doc.meta;
  if (doc.token_count) j["token_count"] = *doc.token_count;
  return j.dump();
}

std::optional<Document> parse_record(std::string_view line) {
  json j = json::parse(line.begin(), line.end(), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;

  auto id = j.find("id");
  auto text = j.find("text");
  if (id == j.end() || !id->is_string() || text == j.end() || !text->is_string()) {
    return std::nullopt;
  }

  Document doc;
  doc.id = id->get<std::string>();
  doc.text = text->get<std::string>();
  if (doc.id.empty() || !utf8::is_valid(doc.text)) return std::nullopt;

  if (auto meta = j.find("meta"); meta != j.end() && !meta->is_null()) {
    if (!meta->is_object()) return std::nullopt;
    for (const auto& [key, value] : meta->items()) {
      doc.meta[key] = value.is_string() ? value.get<std::string>() : value.dump();
    }
  }
  if (auto tc = j.find("token_count"); tc != j.end() && !tc->is_null()) {
    if (!tc->is_number_unsigned() && !(tc->is_number_integer() && tc->get<std::int64_t>() >= 0)) {
      return std::nullopt;
    }
    doc.token_count = tc->get<std::uint64_t>();
  }
  return doc;
}

}  // namespace corpusforge::io
