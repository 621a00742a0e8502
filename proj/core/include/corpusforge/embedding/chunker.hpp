#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "corpusforge/io/document.hpp"
#include "corpusforge/io/tokenizer.hpp"

namespace corpusforge::embedding {

inline constexpr std::size_t kDefaultChunkTokens = 512;

/// A contiguous token window of a document. [token_begin, token_end) indexes
/// the document's token sequence; text is the source substring from the
/// first token's start to the last token's end.
struct Chunk {
  std::string doc_id;
  std::size_t index = 0;
  std::string text;
  std::size_t token_begin = 0;
  std::size_t token_end = 0;

  std::string id() const { return doc_id + "#" + std::to_string(index); }
};

/// Greedy left-to-right tiling into windows of max_tokens tokens; the last
/// chunk may be shorter. Empty documents give no chunks.
std::vector<Chunk> chunk_document(const io::Document& doc, const io::Tokenizer& tokenizer,
                                  std::size_t max_tokens = kDefaultChunkTokens);

}  // namespace corpusforge::embedding
