#pragma once

#include <cstdint>
#include <filesystem>

#include "corpusforge/embedding/embedder.hpp"
#include "corpusforge/embedding/vector_store.hpp"
#include "corpusforge/io/manifest.hpp"
#include "corpusforge/io/tokenizer.hpp"

namespace corpusforge::embedding {

enum class Level { Document, Chunk };

struct EmbedStageOptions {
  Level level = Level::Document;
  std::size_t max_tokens = kDefaultChunkTokens;
  std::size_t docs_per_batch = 256;
  std::size_t request_batch = 32;
  unsigned workers = 1;
};

struct EmbedStats {
  std::uint64_t docs = 0;
  std::uint64_t chunks = 0;
  std::uint64_t vectors = 0;
  std::uint64_t skipped_empty = 0;
  std::uint64_t resumed_docs = 0;
  double chunking_seconds = 0.0;
  double embedding_seconds = 0.0;
};

inline constexpr const char* kVectorsFile = "vectors.f32";
inline constexpr const char* kProgressFile = "progress.log";

/// Embeds every non-empty document of the corpus into out_dir/vectors.f32.
/// Progress is committed per document batch to out_dir/progress.log; a rerun
/// after a failure resumes after the last committed batch.
EmbedStats embed_corpus(const io::Corpus& corpus, Embedder& embedder,
                        const io::Tokenizer& tokenizer, const std::filesystem::path& out_dir,
                        const EmbedStageOptions& options);

}  // namespace corpusforge::embedding
