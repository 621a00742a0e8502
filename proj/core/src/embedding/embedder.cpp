#include "corpusforge/embedding/embedder.hpp"

#include <cmath>

#include "corpusforge/embedding/remote_embedder.hpp"
#include "corpusforge/util/error.hpp"
#include "corpusforge/util/hash.hpp"
#include "corpusforge/util/utf8.hpp"

namespace corpusforge::embedding {

double l2_norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

bool normalize(std::span<float> v) {
  const double n = l2_norm(v);
  if (n == 0.0) return false;
  for (float& x : v) x = static_cast<float>(x / n);
  return true;
}

HashingEmbedder::HashingEmbedder(std::size_t dim, std::uint64_t seed)
    : dim_(dim), seed_(seed), jitter_(dim) {
  if (dim_ < 1) throw ConfigError("embedding dimension must be >= 1");
  for (std::size_t j = 0; j < dim_; ++j) {
    const double u = static_cast<double>(mix64(seed_ ^ mix64(j)) >> 11) * 0x1.0p-53;
    jitter_[j] = kJitterScale * (u - 0.5);
  }
}

std::string HashingEmbedder::name() {
  return "hashing:" + std::to_string(dim_) + ":" + std::to_string(seed_);
}

std::vector<float> HashingEmbedder::embed_one(std::string_view text) const {
  std::vector<double> acc(jitter_);
  for (const auto& span : utf8::split_whitespace(text)) {
    const auto token = utf8::ascii_lower(text.substr(span.offset, span.length));
    acc[fnv1a64(token, seed_) % dim_] += 1.0;
  }
  double norm = 0.0;
  for (double x : acc) norm += x * x;
  norm = std::sqrt(norm);
  std::vector<float> out(dim_);
  for (std::size_t j = 0; j < dim_; ++j) out[j] = static_cast<float>(acc[j] / norm);
  return out;
}

std::vector<std::vector<float>> HashingEmbedder::embed(std::span<const std::string> texts) {
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

std::unique_ptr<Embedder> make_embedder(const EmbedderSpec& spec) {
  switch (spec.kind) {
    case EmbedderSpec::Kind::DeterministicTest:
      return std::make_unique<HashingEmbedder>(spec.dim, spec.hash_seed);
    case EmbedderSpec::Kind::RemoteService:
      return std::make_unique<RemoteEmbedder>(spec);
  }
  throw ConfigError("unknown embedder kind");
}

std::vector<EmbeddingVector> embed_chunks(std::span<const Chunk> chunks, Embedder& embedder,
                                          std::size_t batch_size) {
  batch_size = std::max<std::size_t>(batch_size, 1);
  const std::size_t dim = embedder.dim();
  std::vector<EmbeddingVector> out;
  out.reserve(chunks.size());
  std::vector<std::string> texts;
  for (std::size_t begin = 0; begin < chunks.size(); begin += batch_size) {
    const std::size_t end = std::min(chunks.size(), begin + batch_size);
    texts.clear();
    for (std::size_t i = begin; i < end; ++i) texts.push_back(chunks[i].text);
    auto vectors = embedder.embed(texts);
    if (vectors.size() != texts.size()) {
      throw Error("embedder returned " + std::to_string(vectors.size()) + " vectors for " +
                  std::to_string(texts.size()) + " texts");
    }
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      if (vectors[i].size() != dim) {
        throw Error("embedding dimension mismatch: expected " + std::to_string(dim) + ", got " +
                    std::to_string(vectors[i].size()));
      }
      if (!normalize(vectors[i])) throw Error("embedder returned a zero vector");
      out.push_back({chunks[begin + i].id(), std::move(vectors[i])});
    }
  }
  return out;
}

std::vector<float> mean_pool(std::span<const std::vector<float>> chunk_vectors) {
  if (chunk_vectors.empty()) throw Error("cannot pool zero vectors");
  const std::size_t dim = chunk_vectors.front().size();
  std::vector<double> acc(dim, 0.0);
  for (const auto& v : chunk_vectors) {
    if (v.size() != dim) throw Error("chunk vectors differ in dimension");
    for (std::size_t j = 0; j < dim; ++j) acc[j] += v[j];
  }
  const auto n = static_cast<double>(chunk_vectors.size());
  double norm = 0.0;
  for (double& x : acc) {
    x /= n;
    norm += x * x;
  }
  norm = std::sqrt(norm);
  if (norm == 0.0) throw Error("mean of chunk vectors is zero");
  std::vector<float> out(dim);
  for (std::size_t j = 0; j < dim; ++j) out[j] = static_cast<float>(acc[j] / norm);
  return out;
}

std::optional<EmbeddingVector> embed_document(const io::Document& doc, Embedder& embedder,
                                              const io::Tokenizer& tokenizer,
                                              std::size_t max_tokens, std::size_t batch_size) {
  const auto chunks = chunk_document(doc, tokenizer, max_tokens);
  if (chunks.empty()) return std::nullopt;
  auto vectors = embed_chunks(chunks, embedder, batch_size);
  std::vector<std::vector<float>> values;
  values.reserve(vectors.size());
  for (auto& v : vectors) values.push_back(std::move(v.values));
  return EmbeddingVector{doc.id, mean_pool(values)};
}

}  // namespace corpusforge::embedding
