#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace corpusforge::semdedup {

/// Row-major view over n x dim float data.
struct MatrixView {
  std::span<const float> data;
  std::size_t rows = 0;
  std::size_t dim = 0;

  std::span<const float> row(std::size_t i) const { return data.subspan(i * dim, dim); }
};

struct KMeansOptions {
  std::size_t k = 1;
  std::uint64_t seed = 0;
  int max_iters = 100;
  double tol = 1e-6;  // stop when no centroid moves farther than this
  unsigned workers = 1;
};

struct KMeansModel {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<double> centroids;           // k x dim
  std::vector<std::uint32_t> assignments;  // one per point
  std::vector<double> sq_distances;        // squared distance to assigned centroid
  double inertia = 0.0;
  std::vector<double> inertia_history;  // after every assignment step
  int iterations_run = 0;
  std::uint64_t seed = 0;

  std::span<const double> centroid(std::size_t c) const {
    return {centroids.data() + c * dim, dim};
  }

  /// Nearest centroid by Euclidean distance; ties go to the smaller id.
  /// Throws Error on a dimension mismatch.
  std::uint32_t assign(std::span<const float> v) const;
};

double squared_distance(std::span<const float> v, std::span<const double> c);

/// k-means++ seeding followed by Lloyd iterations until the largest centroid
/// shift falls below tol or max_iters is reached. Empty clusters are
/// reseeded to the point farthest from its centroid. Results depend only on
/// (data, k, seed, max_iters, tol), not on the worker count. Throws
/// ConfigError when there are fewer points than clusters.
KMeansModel kmeans_fit(MatrixView points, const KMeansOptions& options);

}  // namespace corpusforge::semdedup
