#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "corpusforge/io/manifest.hpp"
#include "corpusforge/io/tokenizer.hpp"
#include "corpusforge/minhash/clusters.hpp"
#include "corpusforge/minhash/minhash.hpp"

namespace corpusforge::minhash {

// The four on-disk steps: sign -> bucket -> cluster -> filter. Each reads
// the previous step's file and writes its own atomically, so an existing
// output means the step completed.

struct SignStats {
  std::uint64_t docs = 0;
  std::uint64_t malformed = 0;
};

/// Signature file: magic "CFMHSIG1", params, count, then (id, values) records.
SignStats sign_corpus(const io::Corpus& corpus, const MinHashParams& params,
                      const std::filesystem::path& signatures_file, unsigned workers = 1);

struct SignatureFile {
  MinHashParams params;
  std::vector<MinHashSignature> signatures;
};
SignatureFile read_signatures(const std::filesystem::path& signatures_file);

struct BucketStats {
  std::uint64_t band_records = 0;
  std::uint64_t sorted_runs = 0;
  std::uint64_t candidate_pairs = 0;
};

/// Emits candidate pairs: for each band, documents sharing a band key are
/// linked to the smallest document index in their bucket. Band records are
/// sorted externally in runs of at most run_records, written under work_dir,
/// and merged. Pair file: magic "CFMHPAIR", count, (u32, u32) records.
BucketStats bucket_signatures(const std::filesystem::path& signatures_file,
                              const std::filesystem::path& pairs_file,
                              const std::filesystem::path& work_dir,
                              std::size_t run_records = std::size_t{1} << 22);

std::vector<IndexPair> read_pairs(const std::filesystem::path& pairs_file);

/// Cluster map file: magic "CFMHCLUS", count, (id, representative) records.
DuplicateClusters cluster_signatures(const std::filesystem::path& signatures_file,
                                     const std::filesystem::path& pairs_file,
                                     const std::filesystem::path& cluster_file);
void write_clusters(const DuplicateClusters& clusters, const std::filesystem::path& cluster_file);
DuplicateClusters read_clusters(const std::filesystem::path& cluster_file);

struct DedupStats {
  std::uint64_t docs_in = 0;
  std::uint64_t docs_out = 0;
  std::uint64_t tokens_in = 0;
  std::uint64_t tokens_out = 0;
  std::uint64_t removed = 0;
  std::uint64_t clusters = 0;
};

/// Keeps one document per cluster (the smallest id); ids unknown to the
/// clustering are kept as singletons.
DedupStats filter_duplicates(const DuplicateClusters& clusters, const io::Corpus& corpus,
                             const std::filesystem::path& out_dir, const io::Tokenizer& tokenizer,
                             const io::ProvenanceEntry& provenance,
                             std::size_t max_per_shard = 100000);

}  // namespace corpusforge::minhash
