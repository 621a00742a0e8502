#include "corpusforge/classifier/training_set.hpp"

#include <string>

#include "corpusforge/util/error.hpp"
#include "corpusforge/util/rng.hpp"

namespace corpusforge::classifier {

std::vector<LabeledExample> build_training_set(std::vector<io::Document> positives,
                                               io::DocumentSource& negative_pool,
                                               std::uint64_t ratio, std::uint64_t seed) {
  if (ratio < 1) throw ConfigError("negative-to-positive ratio must be >= 1");
  const std::uint64_t wanted = ratio * positives.size();

  Rng rng(seed);
  std::vector<io::Document> reservoir;
  reservoir.reserve(wanted);
  std::uint64_t seen = 0;
  while (auto doc = negative_pool.next()) {
    if (seen < wanted) {
      reservoir.push_back(std::move(*doc));
    } else {
      const std::uint64_t j = rng.uniform_index(seen + 1);
      if (j < wanted) reservoir[j] = std::move(*doc);
    }
    ++seen;
  }
  if (seen < wanted) {
    throw ConfigError("insufficient negatives: need " + std::to_string(wanted) + " (" +
                      std::to_string(ratio) + " x " + std::to_string(positives.size()) +
                      " positives) but pool has " + std::to_string(seen));
  }

  std::vector<LabeledExample> out;
  out.reserve(positives.size() + reservoir.size());
  for (auto& d : positives) out.push_back({std::move(d), true});
  for (auto& d : reservoir) out.push_back({std::move(d), false});
  rng.shuffle(std::span<LabeledExample>(out));
  return out;
}

}  // namespace corpusforge::classifier
