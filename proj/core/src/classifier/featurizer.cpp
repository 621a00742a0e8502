#include "corpusforge/classifier/featurizer.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "corpusforge/util/error.hpp"
#include "corpusforge/util/hash.hpp"
#include "corpusforge/util/utf8.hpp"

namespace corpusforge::classifier {

void FeaturizerConfig::validate() const {
  if (ngram_orders.empty()) throw ConfigError("featurizer needs at least one n-gram order");
  for (int n : ngram_orders) {
    if (n < 1) throw ConfigError("n-gram orders must be >= 1");
  }
  if (buckets < 1 || buckets > std::numeric_limits<std::uint32_t>::max()) {
    throw ConfigError("bucket count must be in [1, 2^32)");
  }
}

NgramFeaturizer::NgramFeaturizer(FeaturizerConfig config) : config_(std::move(config)) {
  config_.validate();
  auto& orders = config_.ngram_orders;
  std::sort(orders.begin(), orders.end());
  orders.erase(std::unique(orders.begin(), orders.end()), orders.end());
}

std::vector<std::uint32_t> NgramFeaturizer::featurize(std::string_view text) const {
  std::vector<std::string> tokens;
  for (const auto& span : utf8::split_whitespace(text)) {
    tokens.push_back(utf8::ascii_lower(text.substr(span.offset, span.length)));
  }
  std::vector<std::uint32_t> out;
  for (int order : config_.ngram_orders) {
    const auto n = static_cast<std::size_t>(order);
    if (tokens.size() < n) continue;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      std::uint64_t h = fnv1a64(tokens[i], config_.hash_seed);
      for (std::size_t k = 1; k < n; ++k) {
        h = fnv1a64_extend(h, " ");
        h = fnv1a64_extend(h, tokens[i + k]);
      }
      out.push_back(static_cast<std::uint32_t>(h % config_.buckets));
    }
  }
  return out;
}

}  // namespace corpusforge::classifier
