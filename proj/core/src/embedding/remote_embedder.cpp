#include "corpusforge/embedding/remote_embedder.hpp"

#include <chrono>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "corpusforge/util/parallel.hpp"

namespace corpusforge::embedding {

using json = nlohmann::json;

namespace {

enum class Outcome { Ok, Retry, Fatal };

struct Reply {
  Outcome outcome = Outcome::Retry;
  std::string detail;
  std::string body;
};

Outcome classify_status(int status) {
  if (status >= 200 && status < 300) return Outcome::Ok;
  if (status == 429 || status >= 500) return Outcome::Retry;
  return Outcome::Fatal;
}

}  // namespace

RemoteEmbedder::RemoteEmbedder(EmbedderSpec spec) : spec_(std::move(spec)) {
  if (spec_.endpoint.empty()) throw ConfigError("remote embedder needs an endpoint");
  if (spec_.batch_size < 1) throw ConfigError("batch size must be >= 1");
  const auto scheme_end = spec_.endpoint.find("://");
  const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = spec_.endpoint.find('/', host_start);
  host_ = spec_.endpoint.substr(0, path_start);
  if (path_start != std::string::npos) base_path_ = spec_.endpoint.substr(path_start);
  while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
  if (scheme_end == std::string::npos) host_ = "http://" + host_;
  dim_ = 0;
}

std::string RemoteEmbedder::name() {
  if (model_.empty()) health();
  return "remote:" + model_ + ":" + std::to_string(dim());
}

HealthStatus RemoteEmbedder::health() {
  std::string last_error;
  for (int attempt = 0; attempt <= spec_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(spec_.initial_backoff_ms << (attempt - 1)));
    }
    httplib::Client client(host_);
    client.set_connection_timeout(spec_.timeout_seconds, 0);
    client.set_read_timeout(spec_.timeout_seconds, 0);
    ++requests_;
    auto res = client.Get(base_path_ + "/health");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    const Outcome outcome = classify_status(res->status);
    if (outcome == Outcome::Retry) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (outcome == Outcome::Fatal) {
      throw StageError("embedder health check failed: HTTP " + std::to_string(res->status));
    }
    HealthStatus h;
    try {
      const auto j = json::parse(res->body);
      h.status = j.at("status").get<std::string>();
      h.dim = j.at("dim").get<std::size_t>();
      h.model = j.value("model", std::string{});
    } catch (const json::exception& e) {
      throw StageError(std::string("malformed /health response: ") + e.what());
    }
    if (h.status != "ok") {
      last_error = "status " + h.status;
      continue;
    }
    if (spec_.dim != 0 && h.dim != spec_.dim) {
      throw Error("embedding dimension mismatch: configured " + std::to_string(spec_.dim) +
                  ", service reports " + std::to_string(h.dim));
    }
    dim_ = h.dim;
    model_ = h.model;
    return h;
  }
  throw EmbedderUnavailable("embedder at " + spec_.endpoint + " unavailable: " + last_error);
}

std::size_t RemoteEmbedder::dim() {
  if (dim_ == 0) health();
  return dim_;
}

std::vector<std::vector<float>> RemoteEmbedder::embed_batch(std::span<const std::string> texts) {
  const std::string body = json{{"texts", std::vector<std::string>(texts.begin(), texts.end())}}.dump();
  httplib::Client client(host_);
  client.set_connection_timeout(spec_.timeout_seconds, 0);
  client.set_read_timeout(spec_.timeout_seconds, 0);

  std::string last_error;
  for (int attempt = 0; attempt <= spec_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(spec_.initial_backoff_ms << (attempt - 1)));
    }
    ++requests_;
    auto res = client.Post(base_path_ + "/embed", body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    const Outcome outcome = classify_status(res->status);
    if (outcome == Outcome::Retry) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (outcome == Outcome::Fatal) {
      throw StageError("embedder rejected batch of " + std::to_string(texts.size()) + ": HTTP " +
                       std::to_string(res->status));
    }
    std::vector<std::vector<float>> vectors;
    std::size_t dim = 0;
    try {
      const auto j = json::parse(res->body);
      vectors = j.at("vectors").get<std::vector<std::vector<float>>>();
      dim = j.at("dim").get<std::size_t>();
    } catch (const json::exception& e) {
      throw StageError(std::string("malformed /embed response: ") + e.what());
    }
    if (vectors.size() != texts.size()) {
      throw StageError("embedder returned " + std::to_string(vectors.size()) + " vectors for " +
                       std::to_string(texts.size()) + " texts");
    }
    for (auto& v : vectors) {
      if (v.size() != dim || dim != dim_) {
        throw Error("embedding dimension mismatch: expected " + std::to_string(dim_) + ", got " +
                    std::to_string(v.size()));
      }
      normalize(v);
    }
    return vectors;
  }
  throw EmbedderUnavailable("embedder at " + spec_.endpoint + " unavailable after " +
                            std::to_string(spec_.max_retries + 1) + " attempts: " + last_error);
}

std::vector<std::vector<float>> RemoteEmbedder::embed(std::span<const std::string> texts) {
  dim();
  const std::size_t batches = (texts.size() + spec_.batch_size - 1) / spec_.batch_size;
  std::vector<std::vector<std::vector<float>>> results(batches);
  const auto in_flight = static_cast<unsigned>(std::max<std::size_t>(spec_.max_in_flight, 1));
  for_each_block(batches, 1, in_flight, [&](std::size_t b, std::size_t, std::size_t) {
    const std::size_t begin = b * spec_.batch_size;
    const std::size_t end = std::min(texts.size(), begin + spec_.batch_size);
    results[b] = embed_batch(texts.subspan(begin, end - begin));
  });
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (auto& r : results) {
    for (auto& v : r) out.push_back(std::move(v));
  }
  return out;
}

}  // namespace corpusforge::embedding
