#include "corpusforge/semdedup/kmeans.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "corpusforge/util/error.hpp"
#include "corpusforge/util/parallel.hpp"
#include "corpusforge/util/rng.hpp"

namespace corpusforge::semdedup {

namespace {

constexpr std::size_t kPointBlock = 256;

void copy_row(std::span<const float> src, std::span<double> dst) {
  for (std::size_t j = 0; j < src.size(); ++j) dst[j] = src[j];
}

double centroid_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

struct Assigner {
  MatrixView points;
  KMeansModel& model;
  unsigned workers;

  // Returns the number of points whose assignment changed.
  std::size_t run() {
    std::vector<unsigned char> changed(points.rows, 0);
    parallel_for(points.rows, workers, [&](std::size_t i) {
      const auto x = points.row(i);
      std::uint32_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::uint32_t c = 0; c < model.k; ++c) {
        const double d = squared_distance(x, model.centroid(c));
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      changed[i] = model.assignments[i] != best;
      model.assignments[i] = best;
      model.sq_distances[i] = best_d;
    }, kPointBlock);
    std::size_t n = 0;
    double inertia = 0.0;
    for (std::size_t i = 0; i < points.rows; ++i) {
      n += changed[i];
      inertia += model.sq_distances[i];
    }
    model.inertia = inertia;
    model.inertia_history.push_back(inertia);
    return n;
  }
};

void seed_plus_plus(MatrixView points, KMeansModel& model, Rng& rng, unsigned workers) {
  const std::size_t n = points.rows;
  const std::size_t d = points.dim;
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  std::vector<unsigned char> chosen(n, 0);

  auto place = [&](std::size_t c, std::size_t point) {
    chosen[point] = 1;
    copy_row(points.row(point), {model.centroids.data() + c * d, d});
    const auto centroid = model.centroid(c);
    parallel_for(n, workers, [&](std::size_t i) {
      const double dist = squared_distance(points.row(i), centroid);
      if (dist < min_d2[i]) min_d2[i] = dist;
    }, kPointBlock);
  };

  place(0, static_cast<std::size_t>(rng.uniform_index(n)));
  for (std::size_t c = 1; c < model.k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += chosen[i] ? 0.0 : min_d2[i];
    std::size_t pick = n;
    if (total > 0.0) {
      const double r = rng.uniform01() * total;
      double cum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i] || min_d2[i] <= 0.0) continue;
        cum += min_d2[i];
        pick = i;
        if (cum > r) break;
      }
    }
    if (pick == n) {
      // Every remaining point coincides with a centroid.
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) {
          pick = i;
          break;
        }
      }
    }
    place(c, pick);
  }
}

}  // namespace

double squared_distance(std::span<const float> v, std::span<const double> c) {
  double s = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) {
    const double d = static_cast<double>(v[j]) - c[j];
    s += d * d;
  }
  return s;
}

std::uint32_t KMeansModel::assign(std::span<const float> v) const {
  if (v.size() != dim) {
    throw Error("dimension mismatch: vector has " + std::to_string(v.size()) +
                ", centroids have " + std::to_string(dim));
  }
  std::uint32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::uint32_t c = 0; c < k; ++c) {
    const double d = squared_distance(v, centroid(c));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

KMeansModel kmeans_fit(MatrixView points, const KMeansOptions& options) {
  if (options.k < 1) throw ConfigError("k must be >= 1");
  if (points.rows < options.k) {
    throw ConfigError("k-means needs at least k points: k = " + std::to_string(options.k) +
                      ", points = " + std::to_string(points.rows));
  }
  if (points.data.size() != points.rows * points.dim) throw Error("matrix view size mismatch");

  const std::size_t n = points.rows;
  const std::size_t d = points.dim;
  KMeansModel model;
  model.k = options.k;
  model.dim = d;
  model.seed = options.seed;
  model.centroids.assign(model.k * d, 0.0);
  model.assignments.assign(n, std::numeric_limits<std::uint32_t>::max());
  model.sq_distances.assign(n, 0.0);

  Rng rng(options.seed);
  seed_plus_plus(points, model, rng, options.workers);

  Assigner assigner{points, model, options.workers};
  assigner.run();

  std::vector<std::size_t> offsets(model.k + 1);
  std::vector<std::uint32_t> order(n);
  std::vector<double> previous;
  for (int iter = 1; iter <= options.max_iters; ++iter) {
    // Bucket points by cluster in index order so each mean is summed in a
    // fixed order regardless of the worker count.
    std::fill(offsets.begin(), offsets.end(), 0);
    for (std::size_t i = 0; i < n; ++i) ++offsets[model.assignments[i] + 1];
    for (std::size_t c = 0; c < model.k; ++c) offsets[c + 1] += offsets[c];
    {
      std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
      for (std::size_t i = 0; i < n; ++i) {
        order[cursor[model.assignments[i]]++] = static_cast<std::uint32_t>(i);
      }
    }

    previous = model.centroids;
    parallel_for(model.k, options.workers, [&](std::size_t c) {
      const std::size_t begin = offsets[c];
      const std::size_t end = offsets[c + 1];
      if (begin == end) return;
      std::vector<double> acc(d, 0.0);
      for (std::size_t p = begin; p < end; ++p) {
        const auto x = points.row(order[p]);
        for (std::size_t j = 0; j < d; ++j) acc[j] += x[j];
      }
      const double inv = 1.0 / static_cast<double>(end - begin);
      for (std::size_t j = 0; j < d; ++j) model.centroids[c * d + j] = acc[j] * inv;
    }, 4);

    // Reseed empty clusters at the points currently farthest from their
    // centroids, one distinct point per empty cluster.
    std::vector<unsigned char> used;
    for (std::size_t c = 0; c < model.k; ++c) {
      if (offsets[c] != offsets[c + 1]) continue;
      if (used.empty()) used.assign(n, 0);
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (used[i]) continue;
        if (far == n || model.sq_distances[i] > model.sq_distances[far]) far = i;
      }
      used[far] = 1;
      copy_row(points.row(far), {model.centroids.data() + c * d, d});
    }

    double shift = 0.0;
    for (std::size_t c = 0; c < model.k; ++c) {
      const std::span<const double> before(previous.data() + c * d, d);
      shift = std::max(shift, std::sqrt(centroid_distance(before, model.centroid(c))));
    }
    assigner.run();
    model.iterations_run = iter;
    if (shift < options.tol) break;
  }
  return model;
}

}  // namespace corpusforge::semdedup
