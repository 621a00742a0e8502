#include "corpusforge/io/tokenizer.hpp"

#include <fstream>

#include "corpusforge/util/error.hpp"
#include "corpusforge/util/hash.hpp"

namespace corpusforge::io {

std::vector<TokenSpan> WhitespaceTokenizer::tokenize(std::string_view text) const {
  return utf8::split_whitespace(text);
}

std::size_t WhitespaceTokenizer::count(std::string_view text) const {
  return utf8::split_whitespace(text).size();
}

WordPieceTokenizer::WordPieceTokenizer(std::vector<std::string> vocab, std::size_t max_word_bytes)
    : max_word_bytes_(max_word_bytes) {
  if (vocab.empty()) throw ConfigError("wordpiece vocabulary is empty");
  std::uint64_t h = kFnvOffset;
  for (std::uint32_t i = 0; i < vocab.size(); ++i) {
    h = fnv1a64_extend(h, vocab[i]);
    h = fnv1a64_extend(h, "\n");
    vocab_.emplace(std::move(vocab[i]), i);
  }
  vocab_hash_ = h;
}

WordPieceTokenizer WordPieceTokenizer::from_file(const std::filesystem::path& vocab_file) {
  std::ifstream in(vocab_file);
  if (!in) throw IoError("cannot open vocabulary " + vocab_file.string());
  std::vector<std::string> vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) vocab.push_back(line);
  }
  return WordPieceTokenizer(std::move(vocab));
}

std::string WordPieceTokenizer::name() const {
  return "wordpiece:" + hex64(vocab_hash_) + ":" + std::to_string(max_word_bytes_);
}

namespace {

bool is_ascii_punct(unsigned char c) {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
         (c >= 123 && c <= 126);
}

}  // namespace

void WordPieceTokenizer::segment_word(std::string_view text, TokenSpan word,
                                      std::vector<TokenSpan>& out) const {
  if (word.length > max_word_bytes_) {
    out.push_back(word);
    return;
  }
  const std::string lowered = utf8::ascii_lower(text.substr(word.offset, word.length));
  std::vector<TokenSpan> pieces;
  std::size_t start = 0;
  while (start < lowered.size()) {
    std::size_t end = lowered.size();
    bool found = false;
    std::string candidate;
    while (end > start) {
      candidate = start > 0 ? "##" : "";
      candidate.append(lowered, start, end - start);
      if (vocab_.contains(candidate)) {
        found = true;
        break;
      }
      --end;
    }
    if (!found) {
      out.push_back(word);
      return;
    }
    pieces.push_back({word.offset + start, end - start});
    start = end;
  }
  out.insert(out.end(), pieces.begin(), pieces.end());
}

std::vector<TokenSpan> WordPieceTokenizer::tokenize(std::string_view text) const {
  std::vector<TokenSpan> out;
  for (const TokenSpan& ws : utf8::split_whitespace(text)) {
    std::size_t start = ws.offset;
    const std::size_t end = ws.offset + ws.length;
    for (std::size_t i = ws.offset; i < end; ++i) {
      if (is_ascii_punct(static_cast<unsigned char>(text[i]))) {
        if (i > start) segment_word(text, {start, i - start}, out);
        segment_word(text, {i, 1}, out);
        start = i + 1;
      }
    }
    if (end > start) segment_word(text, {start, end - start}, out);
  }
  return out;
}

std::unique_ptr<Tokenizer> make_tokenizer(const TokenizerSpec& spec) {
  if (spec.kind == "whitespace") return std::make_unique<WhitespaceTokenizer>();
  if (spec.kind == "wordpiece") {
    return std::make_unique<WordPieceTokenizer>(WordPieceTokenizer::from_file(spec.vocab_path));
  }
  throw ConfigError("unknown tokenizer kind '" + spec.kind + "'");
}

std::uint64_t count_tokens(const Document& doc, const Tokenizer& tokenizer) {
  return doc.text.empty() ? 0 : tokenizer.count(doc.text);
}

std::uint64_t ensure_token_count(Document& doc, const Tokenizer& tokenizer) {
  if (!doc.token_count) doc.token_count = count_tokens(doc, tokenizer);
  return *doc.token_count;
}

}  // namespace corpusforge::io
