#pragma once

#include <cstdint>
#include <vector>

#include "corpusforge/classifier/linear_classifier.hpp"
#include "corpusforge/io/shards.hpp"

namespace corpusforge::classifier {

/// All positives plus ratio x |positives| negatives drawn uniformly without
/// replacement from the pool (reservoir sampling, so the pool is streamed
/// once), shuffled with the same seed. Throws ConfigError when the pool is
/// too small.
std::vector<LabeledExample> build_training_set(std::vector<io::Document> positives,
                                               io::DocumentSource& negative_pool,
                                               std::uint64_t ratio, std::uint64_t seed);

}  // namespace corpusforge::classifier
