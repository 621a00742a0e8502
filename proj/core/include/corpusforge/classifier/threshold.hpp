#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "corpusforge/classifier/linear_classifier.hpp"
#include "corpusforge/io/manifest.hpp"
#include "corpusforge/io/tokenizer.hpp"

namespace corpusforge::classifier {

struct ScoredDoc {
  double score = 0.0;
  std::uint64_t tokens = 0;
};

struct ThresholdCalibration {
  double threshold = 0.0;
  std::uint64_t achieved_tokens = 0;
  std::uint64_t target_tokens = 0;
  std::uint64_t achieved_docs = 0;
  bool target_exceeds_corpus = false;
};

/// Largest observed score s such that documents scoring >= s hold at least
/// target_tokens tokens. Found by weighted quickselect over the scores
/// (expected linear time). Targets above the corpus total give threshold 0
/// with target_exceeds_corpus set; an empty corpus gives threshold 1.
ThresholdCalibration calibrate_threshold(std::vector<ScoredDoc> scores,
                                         std::uint64_t target_tokens);

/// Scores every non-empty document of the corpus (in parallel), then
/// calibrates.
ThresholdCalibration calibrate_threshold(const LinearClassifier& model, const io::Corpus& corpus,
                                         std::uint64_t target_tokens,
                                         const io::Tokenizer& tokenizer, unsigned workers = 1);

struct FilterStats {
  std::uint64_t docs_in = 0;
  std::uint64_t docs_out = 0;
  std::uint64_t tokens_in = 0;
  std::uint64_t tokens_out = 0;
  std::uint64_t skipped_empty = 0;
  std::uint64_t malformed = 0;
};

inline constexpr const char* kScoreMetaKey = "domain_score";

/// Keeps exactly the documents with predict >= threshold and records the
/// score in meta. Empty documents are dropped and counted. Writes shards and
/// manifest.json under out_dir with provenance appended.
FilterStats filter_corpus(const io::Corpus& corpus, const LinearClassifier& model,
                          double threshold, const std::filesystem::path& out_dir,
                          const io::Tokenizer& tokenizer, const io::ProvenanceEntry& provenance,
                          unsigned workers = 1, std::size_t max_per_shard = 100000);

/// Score formatting used in meta: shortest round-trip decimal.
std::string format_score(double score);

}  // namespace corpusforge::classifier
