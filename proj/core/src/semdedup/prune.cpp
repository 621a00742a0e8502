#include "corpusforge/semdedup/prune.hpp"

#include <algorithm>
#include <numeric>

namespace corpusforge::semdedup {

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += static_cast<double>(a[j]) * b[j];
  return s;
}

double cosine_distance(std::span<const float> a, std::span<const float> b) {
  return std::max(0.0, 1.0 - dot(a, b));
}

std::vector<std::size_t> visit_order(std::span<const ClusterMember> members, KeepPolicy policy) {
  std::vector<std::size_t> order(members.size());
  std::iota(order.begin(), order.end(), 0);
  if (policy == KeepPolicy::FarthestFromCentroid) {
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (members[a].dist_to_centroid != members[b].dist_to_centroid) {
        return members[a].dist_to_centroid > members[b].dist_to_centroid;
      }
      return members[a].id < members[b].id;
    });
  } else {
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return members[a].id < members[b].id; });
  }
  return order;
}

std::vector<std::size_t> prune_cluster(std::span<const ClusterMember> members, double tau,
                                       KeepPolicy policy, ThresholdMode mode) {
  auto too_close = [&](const ClusterMember& a, const ClusterMember& b) {
    if (mode == ThresholdMode::CosineDistance) return cosine_distance(a.vector, b.vector) < tau;
    return dot(a.vector, b.vector) > tau;
  };
  std::vector<std::size_t> kept;
  for (std::size_t idx : visit_order(members, policy)) {
    bool keep = true;
    for (std::size_t k : kept) {
      if (too_close(members[idx], members[k])) {
        keep = false;
        break;
      }
    }
    if (keep) kept.push_back(idx);
  }
  return kept;
}

}  // namespace corpusforge::semdedup
