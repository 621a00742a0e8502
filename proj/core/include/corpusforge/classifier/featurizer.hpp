#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace corpusforge::classifier {

struct FeaturizerConfig {
  std::vector<int> ngram_orders{1, 2};
  std::uint64_t buckets = 2'000'000;
  std::uint64_t hash_seed = 0;

  void validate() const;
  friend bool operator==(const FeaturizerConfig&, const FeaturizerConfig&) = default;
};

/// Hashing-trick bag of word n-grams. Text is lowercased and split on
/// whitespace; each n-gram (tokens joined by one space) is hashed with seeded
/// FNV-1a and reduced modulo the bucket count.
class NgramFeaturizer {
 public:
  explicit NgramFeaturizer(FeaturizerConfig config);

  /// Feature indices in emission order: all order-n grams for each order in
  /// ascending order, left to right. Duplicates are kept (multiset).
  std::vector<std::uint32_t> featurize(std::string_view text) const;

  const FeaturizerConfig& config() const { return config_; }

  friend bool operator==(const NgramFeaturizer&, const NgramFeaturizer&) = default;

 private:
  FeaturizerConfig config_;
};

}  // namespace corpusforge::classifier
