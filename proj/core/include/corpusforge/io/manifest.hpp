#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace corpusforge::io {

struct ShardInfo {
  std::string path;  // relative to the manifest directory unless absolute
  std::uint64_t docs = 0;
  std::uint64_t tokens = 0;

  friend bool operator==(const ShardInfo&, const ShardInfo&) = default;
};

struct ProvenanceEntry {
  std::string stage;
  std::string config_hash;

  friend bool operator==(const ProvenanceEntry&, const ProvenanceEntry&) = default;
};

/// Record of one corpus version. doc_count and token_count equal the sums
/// over shards; provenance only ever grows.
struct CorpusManifest {
  std::vector<ShardInfo> shards;
  std::uint64_t doc_count = 0;
  std::uint64_t token_count = 0;
  std::vector<ProvenanceEntry> provenance;

  /// Throws IoError if the counts disagree with the shard list.
  void validate() const;

  friend bool operator==(const CorpusManifest&, const CorpusManifest&) = default;
};

/// A manifest plus the directory its relative shard paths resolve against.
struct Corpus {
  CorpusManifest manifest;
  std::filesystem::path base_dir;

  std::vector<std::filesystem::path> shard_paths() const;
};

inline constexpr const char* kManifestFile = "manifest.json";

std::string manifest_to_json(const CorpusManifest& manifest);
CorpusManifest manifest_from_json(const std::string& text);

/// Writes atomically (temp file + rename).
void save_manifest(const CorpusManifest& manifest, const std::filesystem::path& file);
CorpusManifest load_manifest(const std::filesystem::path& file);

/// Accepts a manifest file or a directory containing manifest.json.
Corpus load_corpus(const std::filesystem::path& manifest_or_dir);

/// Writes text to file via a temp file and rename.
void write_file_atomic(const std::filesystem::path& file, const std::string& contents);
std::string read_file(const std::filesystem::path& file);

}  // namespace corpusforge::io
