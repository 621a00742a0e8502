#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "corpusforge/embedding/chunker.hpp"

namespace corpusforge::embedding {

/// Maps texts to fixed-dimension vectors, one per text, in input order.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dim() = 0;
  virtual std::vector<std::vector<float>> embed(std::span<const std::string> texts) = 0;
  /// Stable identifier including configuration.
  virtual std::string name() = 0;
};

/// Deterministic test embedder: each lowercased whitespace token adds 1 to
/// bucket FNV-1a(token, seed) mod dim, a fixed per-position jitter derived
/// from the seed is added, and the result is L2-normalized.
class HashingEmbedder final : public Embedder {
 public:
  static constexpr double kJitterScale = 1e-3;

  explicit HashingEmbedder(std::size_t dim = 64, std::uint64_t seed = 0);

  std::size_t dim() override { return dim_; }
  std::vector<std::vector<float>> embed(std::span<const std::string> texts) override;
  std::string name() override;

  std::vector<float> embed_one(std::string_view text) const;
  const std::vector<double>& jitter() const { return jitter_; }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
  std::vector<double> jitter_;
};

struct EmbedderSpec {
  enum class Kind { DeterministicTest, RemoteService };
  Kind kind = Kind::DeterministicTest;
  std::size_t dim = 64;  // expected dimension; 0 accepts whatever the service reports
  std::string endpoint;
  std::size_t batch_size = 32;
  std::uint64_t hash_seed = 0;
  std::size_t max_in_flight = 4;
  int max_retries = 5;
  int initial_backoff_ms = 100;
  int timeout_seconds = 60;
};

std::unique_ptr<Embedder> make_embedder(const EmbedderSpec& spec);

/// L2 norm in double.
double l2_norm(std::span<const float> v);
/// Normalizes in place; zero vectors are left unchanged and reported false.
bool normalize(std::span<float> v);

struct EmbeddingVector {
  std::string id;
  std::vector<float> values;
};

/// One normalized vector per chunk in input order, requests batched by
/// batch_size. Throws Error on a dimension mismatch.
std::vector<EmbeddingVector> embed_chunks(std::span<const Chunk> chunks, Embedder& embedder,
                                          std::size_t batch_size = 32);

/// Mean of chunk vectors, L2-normalized. nullopt for an empty document.
std::optional<EmbeddingVector> embed_document(const io::Document& doc, Embedder& embedder,
                                              const io::Tokenizer& tokenizer,
                                              std::size_t max_tokens = kDefaultChunkTokens,
                                              std::size_t batch_size = 32);

/// Mean of already-normalized chunk vectors, then normalized.
std::vector<float> mean_pool(std::span<const std::vector<float>> chunk_vectors);

}  // namespace corpusforge::embedding
