#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "corpusforge/io/document.hpp"
#include "corpusforge/util/utf8.hpp"

namespace corpusforge::io {

using TokenSpan = utf8::Span;

/// Splits text into byte spans. Implementations are stateless after
/// construction and safe to share across threads.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;

  virtual std::vector<TokenSpan> tokenize(std::string_view text) const = 0;
  virtual std::size_t count(std::string_view text) const { return tokenize(text).size(); }

  /// Stable identifier including configuration; feeds stage config hashes.
  virtual std::string name() const = 0;
};

/// Unicode-whitespace splitting. The default budget tokenizer.
class WhitespaceTokenizer final : public Tokenizer {
 public:
  std::vector<TokenSpan> tokenize(std::string_view text) const override;
  std::size_t count(std::string_view text) const override;
  std::string name() const override { return "whitespace"; }
};

/// Greedy longest-match-first subword tokenizer over a BERT-style
/// vocabulary (one token per line, continuation pieces prefixed "##").
/// Words are split on whitespace and ASCII punctuation and matched
/// case-insensitively; a word with no full segmentation counts as one
/// unknown token.
class WordPieceTokenizer final : public Tokenizer {
 public:
  explicit WordPieceTokenizer(std::vector<std::string> vocab, std::size_t max_word_bytes = 100);
  static WordPieceTokenizer from_file(const std::filesystem::path& vocab_file);

  std::vector<TokenSpan> tokenize(std::string_view text) const override;
  std::string name() const override;

  std::size_t vocab_size() const { return vocab_.size(); }

 private:
  void segment_word(std::string_view text, TokenSpan word, std::vector<TokenSpan>& out) const;

  std::unordered_map<std::string, std::uint32_t> vocab_;
  std::size_t max_word_bytes_;
  std::uint64_t vocab_hash_ = 0;
};

struct TokenizerSpec {
  std::string kind = "whitespace";  // "whitespace" | "wordpiece"
  std::filesystem::path vocab_path;
};

std::unique_ptr<Tokenizer> make_tokenizer(const TokenizerSpec& spec);

/// Token count of doc.text; 0 for empty text.
std::uint64_t count_tokens(const Document& doc, const Tokenizer& tokenizer);

/// Fills doc.token_count if unset and returns it.
std::uint64_t ensure_token_count(Document& doc, const Tokenizer& tokenizer);

}  // namespace corpusforge::io
