#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "corpusforge/io/document.hpp"
#include "corpusforge/io/manifest.hpp"
#include "corpusforge/io/tokenizer.hpp"

namespace corpusforge::io {

/// Pull-based document stream.
class DocumentSource {
 public:
  virtual ~DocumentSource() = default;
  virtual std::optional<Document> next() = 0;
};

/// In-memory source, mostly for tests and small fixtures.
class VectorSource final : public DocumentSource {
 public:
  explicit VectorSource(std::vector<Document> docs) : docs_(std::move(docs)) {}
  std::optional<Document> next() override;

 private:
  std::vector<Document> docs_;
  std::size_t pos_ = 0;
};

struct ReadStats {
  std::uint64_t records = 0;
  std::uint64_t malformed = 0;
};

/// Line reader over plain or gzip files (chosen by a ".gz" extension).
class LineReader {
 public:
  explicit LineReader(const std::filesystem::path& path);
  ~LineReader();
  LineReader(const LineReader&) = delete;
  LineReader& operator=(const LineReader&) = delete;

  bool getline(std::string& line);

 private:
  std::ifstream plain_;
  void* gz_ = nullptr;
  std::filesystem::path path_;
};

/// Streams documents from shards in shard order, then line order. Holds one
/// line at a time. Malformed records are skipped and counted; blank lines
/// are ignored.
class ShardReader final : public DocumentSource {
 public:
  /// Throws IoError if any path does not exist.
  explicit ShardReader(std::vector<std::filesystem::path> paths);
  explicit ShardReader(const Corpus& corpus) : ShardReader(corpus.shard_paths()) {}

  std::optional<Document> next() override;
  const ReadStats& stats() const { return stats_; }

 private:
  std::vector<std::filesystem::path> paths_;
  std::size_t current_ = 0;
  std::unique_ptr<LineReader> reader_;
  std::string line_;
  ReadStats stats_;
};

/// Convenience: drain a reader into memory.
std::vector<Document> read_all(DocumentSource& source);

struct ShardWriterOptions {
  std::size_t max_per_shard = 100000;
  bool compress = false;
  std::string prefix = "shard";
};

/// Writes documents into numbered shards under dir and assembles the
/// manifest. If destroyed before finish(), every file it created is removed.
class ShardWriter {
 public:
  ShardWriter(std::filesystem::path dir, ShardWriterOptions options, const Tokenizer& tokenizer);
  ~ShardWriter();
  ShardWriter(const ShardWriter&) = delete;
  ShardWriter& operator=(const ShardWriter&) = delete;

  /// Fills token_count if unset, then appends.
  void write(Document doc);

  /// Closes the last shard and writes dir/manifest.json.
  CorpusManifest finish(std::vector<ProvenanceEntry> provenance = {});

  std::uint64_t docs_written() const { return manifest_.doc_count; }

 private:
  void open_next_shard();
  void close_shard();

  std::filesystem::path dir_;
  ShardWriterOptions options_;
  const Tokenizer& tokenizer_;
  CorpusManifest manifest_;
  std::vector<std::filesystem::path> created_;
  std::ofstream plain_;
  void* gz_ = nullptr;
  std::size_t in_shard_ = 0;
  bool open_ = false;
  bool finished_ = false;
};

/// Drains source into shards of at most max_per_shard documents.
CorpusManifest write_shards(DocumentSource& source, const std::filesystem::path& dir,
                            const ShardWriterOptions& options, const Tokenizer& tokenizer,
                            std::vector<ProvenanceEntry> provenance = {});

}  // namespace corpusforge::io
