#include "corpusforge/embedding/chunker.hpp"

#include <algorithm>

#include "corpusforge/util/error.hpp"

namespace corpusforge::embedding {

std::vector<Chunk> chunk_document(const io::Document& doc, const io::Tokenizer& tokenizer,
                                  std::size_t max_tokens) {
  if (max_tokens < 1) throw ConfigError("chunk size must be >= 1 token");
  std::vector<Chunk> chunks;
  if (doc.text.empty()) return chunks;
  const auto tokens = tokenizer.tokenize(doc.text);
  for (std::size_t begin = 0; begin < tokens.size(); begin += max_tokens) {
    const std::size_t end = std::min(tokens.size(), begin + max_tokens);
    const std::size_t from = tokens[begin].offset;
    const std::size_t to = tokens[end - 1].offset + tokens[end - 1].length;
    chunks.push_back({doc.id, chunks.size(), doc.text.substr(from, to - from), begin, end});
  }
  return chunks;
}

}  // namespace corpusforge::embedding
