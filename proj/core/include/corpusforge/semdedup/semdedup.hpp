#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "corpusforge/embedding/stage.hpp"
#include "corpusforge/embedding/vector_store.hpp"
#include "corpusforge/io/manifest.hpp"
#include "corpusforge/io/tokenizer.hpp"
#include "corpusforge/semdedup/kmeans.hpp"
#include "corpusforge/semdedup/prune.hpp"

namespace corpusforge::semdedup {

struct SemDedupConfig {
  std::size_t n_clusters = 1000;
  double tau = 0.15;
  embedding::Level level = embedding::Level::Document;
  KeepPolicy keep = KeepPolicy::FarthestFromCentroid;
  ThresholdMode mode = ThresholdMode::CosineDistance;
  std::uint64_t seed = 0;
  int max_iters = 100;
  double tol = 1e-6;
  /// Clusters larger than this are split with recursive 2-means before
  /// pruning.
  std::size_t max_cluster_size = 200000;
  /// Chunk level only: emit surviving chunks as documents instead of
  /// keeping whole documents with at least one surviving chunk.
  bool chunk_corpus_output = false;
  unsigned workers = 1;

  void validate() const;
};

struct ClusterStats {
  std::uint32_t cluster = 0;
  std::size_t size = 0;
  std::size_t kept = 0;
};

/// Pure selection result over a vector set.
struct Selection {
  KMeansModel model;
  std::vector<std::uint32_t> cluster_of;  // per row: final cluster (after splits)
  std::vector<bool> kept_rows;
  std::vector<ClusterStats> clusters;
  std::size_t kept_count() const;
};

/// K-means over all rows, then greedy pruning inside every cluster.
Selection semdedup_select(const embedding::VectorSet& vectors, const SemDedupConfig& config);

struct SemDedupStats {
  std::uint64_t docs_in = 0;
  std::uint64_t docs_out = 0;
  std::uint64_t tokens_in = 0;
  std::uint64_t tokens_out = 0;
  std::uint64_t vectors = 0;
  std::uint64_t vectors_kept = 0;
  std::uint64_t skipped_empty = 0;
  double removal_fraction = 0.0;
  double clustering_seconds = 0.0;
  double dedup_seconds = 0.0;
  double filtering_seconds = 0.0;
};

// Stage outputs under out_dir: shards + manifest.json, cluster_map.jsonl
// ([id, cluster] per row), centroids.f32, kept_ids.txt (one JSON string per
// line, sorted), report.json (per-cluster statistics).

inline constexpr const char* kKeptIdsFile = "kept_ids.txt";
inline constexpr const char* kClusterMapFile = "cluster_map.jsonl";
inline constexpr const char* kCentroidsFile = "centroids.f32";
inline constexpr const char* kReportFile = "report.json";

/// Throws Error listing the ids of non-empty documents that have no
/// embedding.
SemDedupStats run_semdedup(const io::Corpus& corpus, const embedding::VectorSet& vectors,
                           const SemDedupConfig& config, const std::filesystem::path& out_dir,
                           const io::Tokenizer& tokenizer, const io::ProvenanceEntry& provenance,
                           std::size_t max_tokens = embedding::kDefaultChunkTokens,
                           std::size_t max_per_shard = 100000);

struct D4Config {
  std::size_t recluster_k = 1000;
  double r_proto = 0.75;
  std::uint64_t seed = 0;
  int max_iters = 100;
  double tol = 1e-6;
  unsigned workers = 1;

  void validate() const;
};

/// ceil(r_proto * m), guarded against representation error in the product.
std::size_t d4_retain_count(double r_proto, std::size_t m);

/// Fresh K-means, then per cluster keep the ceil(r_proto * m) members
/// farthest from the centroid (ties by id ascending).
Selection d4_select(const embedding::VectorSet& vectors, const D4Config& config);

/// Applies D4 to a (document-level) deduplicated corpus. Vectors for
/// documents absent from the corpus are ignored.
SemDedupStats run_d4(const io::Corpus& corpus, const embedding::VectorSet& vectors,
                     const D4Config& config, const std::filesystem::path& out_dir,
                     const io::Tokenizer& tokenizer, const io::ProvenanceEntry& provenance,
                     std::size_t max_per_shard = 100000);

/// Reads a kept-id list written by either stage.
std::vector<std::string> read_kept_ids(const std::filesystem::path& file);

}  // namespace corpusforge::semdedup
