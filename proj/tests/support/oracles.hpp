#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "corpusforge/embedding/vector_store.hpp"
#include "corpusforge/semdedup/kmeans.hpp"
#include "corpusforge/semdedup/prune.hpp"

// Brute-force reference implementations. Deliberately naive: no shared code
// paths with the library beyond its data types.
namespace cftest::oracle {

/// Per node, the smallest id in its connected component (BFS).
std::vector<std::string> components(const std::vector<std::string>& ids,
                                    const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges);

struct Lloyd {
  std::vector<double> centroids;
  std::vector<std::uint32_t> assignments;
  double inertia = 0.0;
  int iterations = 0;
};

/// Plain Lloyd from given centroids until assignments stop changing.
Lloyd lloyd(const std::vector<float>& points, std::size_t dim, std::vector<double> centroids,
            int max_iters = 1000);

/// Brute-force nearest centroid, first minimum wins.
std::uint32_t nearest(const float* x, const std::vector<double>& centroids, std::size_t dim);

/// Greedy pruning per cluster: members ordered by (distance to their
/// cluster centroid desc, id asc) or id asc; a member survives iff it is not
/// too close to any earlier survivor. Uses a full pairwise similarity table.
std::vector<bool> greedy_prune(const corpusforge::embedding::VectorSet& vectors,
                               const std::vector<std::uint32_t>& cluster_of,
                               const std::vector<double>& centroids, double tau,
                               corpusforge::semdedup::KeepPolicy policy,
                               corpusforge::semdedup::ThresholdMode mode);

/// Per cluster, the ceil(r * m) members farthest from the centroid, ties by id.
std::vector<bool> d4_keep(const corpusforge::embedding::VectorSet& vectors,
                          const std::vector<std::uint32_t>& cluster_of,
                          const std::vector<double>& centroids, double r_proto);

}  // namespace cftest::oracle
