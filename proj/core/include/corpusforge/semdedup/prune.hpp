#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace corpusforge::semdedup {

enum class KeepPolicy { FarthestFromCentroid, SmallestId };

/// How tau is read: as a cosine distance (prune when 1 - cos < tau) or as a
/// cosine similarity (prune when cos > tau).
enum class ThresholdMode { CosineDistance, CosineSimilarity };

struct ClusterMember {
  std::string_view id;
  std::span<const float> vector;  // unit norm
  double dist_to_centroid = 0.0;
};

double dot(std::span<const float> a, std::span<const float> b);

/// Cosine distance 1 - a.b for unit vectors, clamped at 0.
double cosine_distance(std::span<const float> a, std::span<const float> b);

/// Visit order used by the greedy pass: (distance desc, id asc) for
/// FarthestFromCentroid, id asc for SmallestId. Returns member indices.
std::vector<std::size_t> visit_order(std::span<const ClusterMember> members, KeepPolicy policy);

/// Greedy within-cluster pruning: walk members in visit order and keep one
/// iff it is not too close (per mode) to any member already kept. Returns
/// the kept member indices in visit order.
std::vector<std::size_t> prune_cluster(std::span<const ClusterMember> members, double tau,
                                       KeepPolicy policy,
                                       ThresholdMode mode = ThresholdMode::CosineDistance);

}  // namespace corpusforge::semdedup
