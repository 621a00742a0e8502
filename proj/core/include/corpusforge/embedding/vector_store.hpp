#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace corpusforge::embedding {

/// Row metadata for a stored vector. For document-level vectors doc == id
/// and chunk is empty.
struct VectorKey {
  std::string id;
  std::string doc;
  std::optional<std::uint64_t> chunk;

  friend bool operator==(const VectorKey&, const VectorKey&) = default;
};

/// In-memory set of equal-length float vectors, row-major.
struct VectorSet {
  std::size_t dim = 0;
  std::vector<VectorKey> keys;
  std::vector<float> data;

  std::size_t size() const { return keys.size(); }
  std::span<const float> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
  void append(VectorKey key, std::span<const float> values);
};

// On-disk layout: <path> holds magic "CFVECF32", u32 version, u32 dim,
// u64 count, then count x dim little-endian float32. <path>.ids.jsonl holds
// one JSON object per row: {"id": ..., "doc": ..., "chunk": k?}.

std::filesystem::path ids_path(const std::filesystem::path& vectors_file);

class VectorWriter {
 public:
  /// Opens for writing. With resume_rows set, keeps the first resume_rows
  /// rows of an existing file pair and truncates the rest.
  VectorWriter(std::filesystem::path path, std::size_t dim,
               std::optional<std::uint64_t> resume_rows = std::nullopt);
  ~VectorWriter();
  VectorWriter(const VectorWriter&) = delete;
  VectorWriter& operator=(const VectorWriter&) = delete;

  void append(const VectorKey& key, std::span<const float> values);
  /// Flushes data and rewrites the header count.
  void commit();
  std::uint64_t rows() const { return rows_; }

 private:
  std::filesystem::path path_;
  std::size_t dim_;
  std::fstream data_;
  std::ofstream ids_;
  std::uint64_t rows_ = 0;
};

VectorSet read_vectors(const std::filesystem::path& path);
void write_vectors(const VectorSet& set, const std::filesystem::path& path);

}  // namespace corpusforge::embedding
