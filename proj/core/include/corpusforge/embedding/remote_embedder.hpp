#pragma once

#include <atomic>
#include <string>

#include "corpusforge/embedding/embedder.hpp"
#include "corpusforge/util/error.hpp"

namespace corpusforge::embedding {

/// Remote service unreachable after all retries.
class EmbedderUnavailable : public StageError {
 public:
  using StageError::StageError;
};

struct HealthStatus {
  std::string status;
  std::size_t dim = 0;
  std::string model;
};

/// HTTP client for the embedding sidecar.
///
///   POST {endpoint}/embed   {"texts": [...]}  ->  {"vectors": [[...], ...], "dim": d}
///   GET  {endpoint}/health  ->  {"status": "ok", "dim": d, "model": "..."}
///
/// Batches of batch_size texts are sent with up to max_in_flight concurrent
/// requests. Connection failures, 429 and 5xx responses are retried with
/// exponential backoff; other 4xx responses and dimension mismatches are
/// fatal. Returned vectors are L2-normalized on receipt.
class RemoteEmbedder final : public Embedder {
 public:
  explicit RemoteEmbedder(EmbedderSpec spec);

  std::size_t dim() override;
  std::vector<std::vector<float>> embed(std::span<const std::string> texts) override;
  std::string name() override;

  HealthStatus health();

  /// Requests issued so far, including retries.
  std::size_t requests_sent() const { return requests_; }

 private:
  std::vector<std::vector<float>> embed_batch(std::span<const std::string> texts);

  EmbedderSpec spec_;
  std::string host_;  // scheme://host:port
  std::string base_path_;
  std::size_t dim_ = 0;
  std::string model_;
  std::atomic<std::size_t> requests_{0};
};

}  // namespace corpusforge::embedding
