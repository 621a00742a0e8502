#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "corpusforge/embedding/embedder.hpp"
#include "corpusforge/embedding/stage.hpp"
#include "corpusforge/io/shards.hpp"
#include "corpusforge/io/tokenizer.hpp"
#include "corpusforge/semdedup/kmeans.hpp"
#include "corpusforge/semdedup/prune.hpp"
#include "corpusforge/semdedup/semdedup.hpp"
#include "corpusforge/util/error.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace corpusforge;
using namespace corpusforge::semdedup;
using embedding::VectorSet;
using cftest::Rng;
using cftest::TempDir;

namespace {

std::vector<float> blobs(Rng& rng, std::size_t k, std::size_t per, std::size_t dim, double spread,
                         std::vector<std::size_t>* labels = nullptr) {
  std::vector<std::vector<double>> centers(k, std::vector<double>(dim));
  for (auto& c : centers) {
    for (auto& x : c) x = 10.0 * cftest::normal(rng);
  }
  std::vector<float> out;
  for (std::size_t i = 0; i < k * per; ++i) {
    const std::size_t b = i % k;
    if (labels) labels->push_back(b);
    for (std::size_t j = 0; j < dim; ++j) out.push_back(static_cast<float>(centers[b][j] + spread * cftest::normal(rng)));
  }
  return out;
}

std::vector<float> gaussian(Rng& rng, std::size_t n, std::size_t dim) {
  std::vector<float> out(n * dim);
  for (auto& x : out) x = static_cast<float>(cftest::normal(rng));
  return out;
}

MatrixView view(const std::vector<float>& v, std::size_t dim) { return {v, v.size() / dim, dim}; }

VectorSet make_set(const std::vector<float>& raw, std::size_t dim, const std::string& prefix = "v") {
  VectorSet s;
  s.dim = dim;
  for (std::size_t i = 0; i < raw.size() / dim; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "%s%05zu", prefix.c_str(), i);
    s.append({id, id, std::nullopt}, std::span<const float>(raw.data() + i * dim, dim));
  }
  return s;
}

void expect_monotone(const KMeansModel& m) {
  for (std::size_t i = 1; i < m.inertia_history.size(); ++i) {
    EXPECT_LE(m.inertia_history[i], m.inertia_history[i - 1] * (1 + 1e-12) + 1e-300) << "step " << i;
  }
}

// Unit vector close to v: cosine distance below `within`.
std::vector<float> perturb(Rng& rng, std::span<const float> v, double within) {
  std::vector<float> out(v.begin(), v.end());
  std::vector<double> noise(v.size());
  double nn = 0;
  for (auto& x : noise) nn += (x = cftest::normal(rng)) * x;
  const double eps = std::sqrt(within);  // |n| = eps gives 1-cos ~ eps^2/2
  for (std::size_t j = 0; j < v.size(); ++j) out[j] += static_cast<float>(eps * noise[j] / std::sqrt(nn));
  embedding::normalize(out);
  return out;
}

io::Document doc(std::string id, std::string text) { return {std::move(id), std::move(text), {}, std::nullopt}; }

}  // namespace

TEST(KMeans, ThreeBlobRecoveryAndLloydOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    std::vector<std::size_t> labels;
    const auto pts = blobs(rng, 3, 20, 8, 0.1, &labels);
    auto m = kmeans_fit(view(pts, 8), {.k = 3, .seed = seed, .max_iters = 1000, .tol = 1e-12});
    std::map<std::size_t, std::set<std::uint32_t>> blob_to_cluster;
    for (std::size_t i = 0; i < labels.size(); ++i) blob_to_cluster[labels[i]].insert(m.assignments[i]);
    std::set<std::uint32_t> used;
    for (auto& [b, cs] : blob_to_cluster) {
      ASSERT_EQ(cs.size(), 1u) << "blob " << b << " split";
      used.insert(*cs.begin());
    }
    EXPECT_EQ(used.size(), 3u);

    auto init = kmeans_fit(view(pts, 8), {.k = 3, .seed = seed, .max_iters = 0});
    const auto ref = cftest::oracle::lloyd(pts, 8, init.centroids);
    EXPECT_EQ(m.assignments, ref.assignments);
    EXPECT_NEAR(m.inertia, ref.inertia, 1e-9 * std::max(1.0, ref.inertia));
    expect_monotone(m);
  }
}

TEST(KMeans, MatchesLloydOracleOnUnstructuredData) {
  int compared = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(100 + seed);
    const auto pts = gaussian(rng, 200, 4);
    auto init = kmeans_fit(view(pts, 4), {.k = 6, .seed = seed, .max_iters = 0});
    const auto ref = cftest::oracle::lloyd(pts, 4, init.centroids);
    std::set<std::uint32_t> nonempty(ref.assignments.begin(), ref.assignments.end());
    if (nonempty.size() != 6) continue;  // the oracle has no reseeding rule
    auto m = kmeans_fit(view(pts, 4), {.k = 6, .seed = seed, .max_iters = 1000, .tol = 1e-300});
    EXPECT_EQ(m.assignments, ref.assignments) << seed;
    EXPECT_NEAR(m.inertia, ref.inertia, 1e-9 * ref.inertia);
    for (std::size_t i = 0; i < m.centroids.size(); ++i) EXPECT_NEAR(m.centroids[i], ref.centroids[i], 1e-12);
    expect_monotone(m);
    ++compared;
  }
  EXPECT_GE(compared, 20);
}

TEST(KMeans, SingleClusterClosedForm) {
  Rng rng(3);
  const std::size_t dim = 16, n = 300;
  auto pts = cftest::random_unit_vectors(rng, n, dim);
  auto m = kmeans_fit(view(pts, dim), {.k = 1, .seed = 1});
  std::vector<long double> mean(dim, 0.0L);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) mean[j] += pts[i * dim + j];
  }
  for (auto& x : mean) x /= n;
  long double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) total += (pts[i * dim + j] - mean[j]) * (pts[i * dim + j] - mean[j]);
  }
  for (std::size_t j = 0; j < dim; ++j) EXPECT_NEAR(m.centroids[j], static_cast<double>(mean[j]), 1e-9);
  EXPECT_NEAR(m.inertia, static_cast<double>(total), 1e-9);
  for (auto a : m.assignments) EXPECT_EQ(a, 0u);
}

TEST(KMeans, OneClusterPerPoint) {
  Rng rng(4);
  auto pts = cftest::random_unit_vectors(rng, 50, 8);
  auto m = kmeans_fit(view(pts, 8), {.k = 50, .seed = 2});
  EXPECT_NEAR(m.inertia, 0.0, 1e-9);
  EXPECT_EQ(std::set<std::uint32_t>(m.assignments.begin(), m.assignments.end()).size(), 50u);
  for (std::size_t i = 0; i < 50; ++i) {
    const auto c = m.centroid(m.assignments[i]);
    for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(c[j], pts[i * 8 + j], 1e-9);
  }
}

TEST(KMeans, TooFewPointsAndBadK) {
  std::vector<float> pts(3 * 2, 0.5f);
  EXPECT_THROW(kmeans_fit(view(pts, 2), {.k = 4}), ConfigError);
  EXPECT_THROW(kmeans_fit(view(pts, 2), {.k = 0}), ConfigError);
}

TEST(KMeans, DuplicatePointsAndEmptyClusterReseed) {
  // 5 distinct locations, 40 points, k = 5: seeding must not double up.
  std::vector<float> pts;
  for (int i = 0; i < 40; ++i) {
    pts.push_back(static_cast<float>(i % 5));
    pts.push_back(0.0f);
  }
  auto m = kmeans_fit(view(pts, 2), {.k = 5, .seed = 9});
  EXPECT_NEAR(m.inertia, 0.0, 1e-12);
  expect_monotone(m);
}

TEST(KMeans, InertiaMonotoneOnManyFixtures) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed * 7 + 1);
    const std::size_t dim = 2 + seed % 10;
    const auto pts = seed % 2 ? gaussian(rng, 150 + seed, dim) : cftest::random_unit_vectors(rng, 150, dim);
    auto m = kmeans_fit(view(pts, dim), {.k = 1 + seed % 12, .seed = seed, .max_iters = 50, .tol = 0});
    ASSERT_FALSE(m.inertia_history.empty());
    expect_monotone(m);
    EXPECT_EQ(m.inertia, m.inertia_history.back());
  }
}

TEST(KMeans, WorkerCountInvariant) {
  Rng rng(5);
  const auto pts = cftest::random_unit_vectors(rng, 3000, 24);
  auto a = kmeans_fit(view(pts, 24), {.k = 17, .seed = 3, .workers = 1});
  for (unsigned w : {4u, 16u}) {
    auto b = kmeans_fit(view(pts, 24), {.k = 17, .seed = 3, .workers = w});
    EXPECT_EQ(a.centroids, b.centroids);
    EXPECT_EQ(a.assignments, b.assignments);
    EXPECT_EQ(a.inertia_history, b.inertia_history);
  }
}

TEST(KMeansAssign, TieRuleAndBruteForce) {
  KMeansModel m;
  m.k = 6;
  m.dim = 1;
  m.centroids = {10, 20, -1, 30, 40, 1};
  const std::vector<float> zero = {0.0f};
  EXPECT_EQ(m.assign(zero), 2u);
  const std::vector<float> at = {30.0f};
  EXPECT_EQ(m.assign(at), 3u);
  const std::vector<float> bad = {0.0f, 1.0f};
  EXPECT_THROW(m.assign(bad), Error);

  Rng rng(6);
  const auto pts = cftest::random_unit_vectors(rng, 500, 12);
  auto fit = kmeans_fit(view(pts, 12), {.k = 9, .seed = 1});
  for (std::size_t i = 0; i < 500; ++i) {
    const std::span<const float> x(pts.data() + i * 12, 12);
    EXPECT_EQ(fit.assign(x), cftest::oracle::nearest(x.data(), fit.centroids, 12));
    EXPECT_EQ(fit.assignments[i], fit.assign(x));  // nearest centroid at the end
  }
}

TEST(Prune, Boundaries) {
  Rng rng(7);
  auto raw = cftest::random_unit_vectors(rng, 20, 8);
  auto set = make_set(raw, 8);
  std::vector<ClusterMember> members;
  for (std::size_t i = 0; i < set.size(); ++i) members.push_back({set.keys[i].id, set.row(i), static_cast<double>(i % 3)});
  EXPECT_EQ(prune_cluster(members, 0.0, KeepPolicy::FarthestFromCentroid).size(), 20u);
  EXPECT_EQ(prune_cluster(members, 1.0 + 1e-9, KeepPolicy::FarthestFromCentroid, ThresholdMode::CosineSimilarity).size(), 20u);

  std::vector<ClusterMember> twins = {{"b", set.row(0), 0.5}, {"a", set.row(0), 0.5}};
  for (double tau : {1e-9, 0.15, 1.0}) {
    const auto kept = prune_cluster(twins, tau, KeepPolicy::FarthestFromCentroid);
    ASSERT_EQ(kept.size(), 1u);
    EXPECT_EQ(twins[kept[0]].id, "a");
  }
}

TEST(Prune, VisitOrder) {
  const std::vector<float> v = {1.0f};
  std::vector<ClusterMember> m = {{"c", v, 1.0}, {"a", v, 2.0}, {"b", v, 1.0}, {"d", v, 3.0}};
  EXPECT_EQ(visit_order(m, KeepPolicy::FarthestFromCentroid), (std::vector<std::size_t>{3, 1, 2, 0}));
  EXPECT_EQ(visit_order(m, KeepPolicy::SmallestId), (std::vector<std::size_t>{1, 2, 0, 3}));
}

TEST(Prune, MatchesPairwiseOracleAndGreedyCharacterization) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    // 20 members bunched around a few directions so pruning does something.
    const std::size_t dim = 6;
    auto anchors = cftest::random_unit_vectors(rng, 4, dim);
    std::vector<float> raw;
    for (int i = 0; i < 20; ++i) {
      auto p = perturb(rng, std::span<const float>(anchors.data() + (i % 4) * dim, dim), 0.3);
      raw.insert(raw.end(), p.begin(), p.end());
    }
    auto set = make_set(raw, dim);
    std::vector<double> centroid(dim, 0.0);
    for (std::size_t i = 0; i < 20; ++i) {
      for (std::size_t j = 0; j < dim; ++j) centroid[j] += raw[i * dim + j] / 20.0;
    }
    std::vector<ClusterMember> members;
    for (std::size_t i = 0; i < 20; ++i) {
      members.push_back({set.keys[i].id, set.row(i), std::sqrt(squared_distance(set.row(i), centroid))});
    }
    const std::vector<std::uint32_t> one(20, 0);
    for (double tau : {0.0, 0.05, 0.1, 0.15, 0.3, 0.6}) {
      for (auto policy : {KeepPolicy::FarthestFromCentroid, KeepPolicy::SmallestId}) {
        for (auto mode : {ThresholdMode::CosineDistance, ThresholdMode::CosineSimilarity}) {
          const auto kept = prune_cluster(members, tau, policy, mode);
          const auto want = cftest::oracle::greedy_prune(set, one, centroid, tau, policy, mode);
          std::vector<bool> got(20, false);
          for (auto k : kept) got[k] = true;
          ASSERT_EQ(got, want) << "seed " << seed << " tau " << tau;
        }
      }
      // Survivors are pairwise at least tau apart, and every pruned member
      // is closer than tau to a survivor visited before it.
      const auto order = visit_order(members, KeepPolicy::FarthestFromCentroid);
      const auto kept = prune_cluster(members, tau, KeepPolicy::FarthestFromCentroid);
      std::set<std::size_t> alive(kept.begin(), kept.end());
      for (auto a : kept) {
        for (auto b : kept) {
          if (a != b) EXPECT_GE(cosine_distance(members[a].vector, members[b].vector), tau);
        }
      }
      for (std::size_t p = 0; p < order.size(); ++p) {
        if (alive.count(order[p])) continue;
        bool covered = false;
        for (std::size_t q = 0; q < p; ++q) {
          covered |= alive.count(order[q]) && cosine_distance(members[order[p]].vector, members[order[q]].vector) < tau;
        }
        EXPECT_TRUE(covered);
      }
    }
  }
}

TEST(Prune, LargerTauCanKeepAMemberASmallerTauPruned) {
  // Visit order A, B, C with d(A,B)=0.2, d(B,C)=0.05, d(A,C)=0.4 (angles in
  // the plane). tau=0.1 keeps A, B and B prunes C; tau=0.3 lets A prune B,
  // and C then survives. Kept sets are not nested in tau.
  auto unit = [](double deg) {
    const double r = deg * 3.14159265358979323846 / 180.0;
    return std::vector<float>{static_cast<float>(std::cos(r)), static_cast<float>(std::sin(r))};
  };
  const double ab = std::acos(0.8) * 180 / 3.14159265358979323846;
  const double bc = std::acos(0.95) * 180 / 3.14159265358979323846;
  const auto a = unit(0), b = unit(ab), c = unit(ab + bc);
  std::vector<ClusterMember> m = {{"a", a, 3.0}, {"b", b, 2.0}, {"c", c, 1.0}};
  ASSERT_NEAR(cosine_distance(a, b), 0.2, 1e-6);
  ASSERT_NEAR(cosine_distance(b, c), 0.05, 1e-6);
  ASSERT_GT(cosine_distance(a, c), 0.3);
  EXPECT_EQ(prune_cluster(m, 0.1, KeepPolicy::FarthestFromCentroid), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(prune_cluster(m, 0.3, KeepPolicy::FarthestFromCentroid), (std::vector<std::size_t>{0, 2}));
}

TEST(SemDedupSelect, MatchesPerClusterOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 50);
    const std::size_t dim = 8;
    std::vector<float> raw;
    auto base = cftest::random_unit_vectors(rng, 120, dim);
    raw = base;
    for (int i = 0; i < 80; ++i) {
      auto p = perturb(rng, std::span<const float>(base.data() + rng.uniform_index(120) * dim, dim), 0.2);
      raw.insert(raw.end(), p.begin(), p.end());
    }
    auto set = make_set(raw, dim);
    SemDedupConfig cfg;
    cfg.n_clusters = 1 + seed % 10;
    cfg.tau = 0.05 + 0.01 * seed;
    cfg.seed = seed;
    cfg.keep = seed % 3 ? KeepPolicy::FarthestFromCentroid : KeepPolicy::SmallestId;
    const auto sel = semdedup_select(set, cfg);
    const auto want = cftest::oracle::greedy_prune(set, sel.cluster_of, sel.model.centroids, cfg.tau, cfg.keep, cfg.mode);
    EXPECT_EQ(sel.kept_rows, want) << seed;
    std::size_t total = 0, kept = 0;
    for (const auto& c : sel.clusters) {
      total += c.size;
      kept += c.kept;
    }
    EXPECT_EQ(total, set.size());
    EXPECT_EQ(kept, sel.kept_count());
  }
}

TEST(SemDedupSelect, ExactDuplicatesNeverBothSurvive) {
  Rng rng(8);
  auto base = cftest::random_unit_vectors(rng, 60, 10);
  auto raw = base;
  raw.insert(raw.end(), base.begin(), base.end());
  auto set = make_set(raw, 10);
  for (double tau : {1e-6, 0.15, 0.9}) {
    SemDedupConfig cfg;
    cfg.n_clusters = 7;
    cfg.tau = tau;
    const auto sel = semdedup_select(set, cfg);
    for (std::size_t i = 0; i < 60; ++i) EXPECT_FALSE(sel.kept_rows[i] && sel.kept_rows[i + 60]);
    for (std::size_t i = 0; i < 60; ++i) EXPECT_EQ(sel.cluster_of[i], sel.cluster_of[i + 60]);
  }
}

TEST(SemDedupSelect, SecondPassRemovesNothing) {
  Rng rng(9);
  const std::size_t dim = 6;
  auto base = cftest::random_unit_vectors(rng, 30, dim);
  std::vector<float> raw;
  for (int i = 0; i < 150; ++i) {
    auto p = perturb(rng, std::span<const float>(base.data() + (i % 30) * dim, dim), 0.2);
    raw.insert(raw.end(), p.begin(), p.end());
  }
  auto set = make_set(raw, dim);
  SemDedupConfig cfg;
  cfg.n_clusters = 1;
  cfg.tau = 0.1;
  const auto first = semdedup_select(set, cfg);
  VectorSet survivors;
  survivors.dim = dim;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (first.kept_rows[i]) survivors.append(set.keys[i], set.row(i));
  }
  ASSERT_LT(survivors.size(), set.size());
  const auto second = semdedup_select(survivors, cfg);
  EXPECT_EQ(second.kept_count(), survivors.size());
}

TEST(SemDedupSelect, ClusterSizeCapSplits) {
  Rng rng(10);
  auto raw = cftest::random_unit_vectors(rng, 400, 5);
  auto set = make_set(raw, 5);
  SemDedupConfig cfg;
  cfg.n_clusters = 3;
  cfg.tau = 0.02;
  cfg.max_cluster_size = 25;
  for (unsigned w : {1u, 8u}) {
    cfg.workers = w;
    const auto sel = semdedup_select(set, cfg);
    std::map<std::uint32_t, std::size_t> sizes;
    for (auto c : sel.cluster_of) ++sizes[c];
    for (auto [c, n] : sizes) EXPECT_LE(n, 25u) << c;
    EXPECT_GE(sizes.size(), 400u / 25u);
    for (const auto& c : sel.clusters) {
      if (c.size) EXPECT_EQ(c.size, sizes[c.cluster]);
    }
    EXPECT_TRUE(std::is_sorted(sel.clusters.begin(), sel.clusters.end(),
                               [](auto& a, auto& b) { return a.cluster < b.cluster; }));
    static std::vector<bool> first;
    if (w == 1) first = sel.kept_rows;
    else EXPECT_EQ(sel.kept_rows, first);
  }
}

TEST(SemDedupConfig, Validation) {
  SemDedupConfig c;
  c.tau = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c.tau = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.chunk_corpus_output = true;
  EXPECT_THROW(c.validate(), ConfigError);
  c.level = embedding::Level::Chunk;
  EXPECT_NO_THROW(c.validate());
  D4Config d;
  d.r_proto = 0.0;
  EXPECT_THROW(d.validate(), ConfigError);
  d.r_proto = 1.01;
  EXPECT_THROW(d.validate(), ConfigError);
}

TEST(D4, RetainCount) {
  EXPECT_EQ(d4_retain_count(0.75, 4), 3u);
  EXPECT_EQ(d4_retain_count(0.75, 1), 1u);
  EXPECT_EQ(d4_retain_count(0.75, 5), 4u);
  EXPECT_EQ(d4_retain_count(0.3, 10), 3u);  // 0.3 * 10 rounds above 3 in binary
  EXPECT_EQ(d4_retain_count(0.1, 10), 1u);
  EXPECT_EQ(d4_retain_count(0.01, 10), 1u);
  EXPECT_EQ(d4_retain_count(1.0, 7), 7u);
}

TEST(D4, FourMemberClusterKeepsThreeFarthest) {
  const std::vector<float> raw = {1, 0, 0.9f, 0.1f, 0.5f, 0.5f, 0.95f, 0.0f};
  auto set = make_set(raw, 2);
  D4Config cfg;
  cfg.recluster_k = 1;
  cfg.r_proto = 0.75;
  const auto sel = d4_select(set, cfg);
  // centroid (0.8375, 0.15): the row nearest it is the one dropped
  const auto want = cftest::oracle::d4_keep(set, sel.cluster_of, sel.model.centroids, 0.75);
  EXPECT_EQ(sel.kept_rows, want);
  EXPECT_EQ(sel.kept_count(), 3u);
  EXPECT_FALSE(sel.kept_rows[1]);
}

TEST(D4, MatchesSortOracleAndIdentityAtOne) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed + 300);
    auto raw = cftest::random_unit_vectors(rng, 200, 6);
    auto set = make_set(raw, 6);
    D4Config cfg;
    cfg.recluster_k = 1 + seed % 15;
    cfg.r_proto = 0.05 + 0.9 * rng.uniform01();
    cfg.seed = seed;
    const auto sel = d4_select(set, cfg);
    EXPECT_EQ(sel.kept_rows, cftest::oracle::d4_keep(set, sel.cluster_of, sel.model.centroids, cfg.r_proto));
    cfg.r_proto = 1.0;
    EXPECT_EQ(d4_select(set, cfg).kept_count(), 200u);
  }
}

class SemDedupStage : public ::testing::Test {
 protected:
  embedding::VectorSet embed(const io::Corpus& c, const std::string& name,
                             embedding::Level level = embedding::Level::Document, std::size_t max_tokens = 512) {
    embedding::HashingEmbedder e(256, 1);
    embedding::EmbedStageOptions opt;
    opt.level = level;
    opt.max_tokens = max_tokens;
    embedding::embed_corpus(c, e, tok_, dir_ / name, opt);
    return embedding::read_vectors(dir_ / name / embedding::kVectorsFile);
  }
  TempDir dir_;
  io::WhitespaceTokenizer tok_;
};

TEST_F(SemDedupStage, HundredCopiesRemoved) {
  Rng rng(11);
  std::vector<io::Document> docs;
  for (int i = 0; i < 100; ++i) {
    const auto text = cftest::join(cftest::random_words(rng, i % 4, 2000, 40));
    docs.push_back(doc("u" + std::to_string(1000 + i), text));
    docs.push_back(doc("v" + std::to_string(1000 + i), text));
  }
  auto corpus = cftest::write_corpus(docs, dir_ / "in", 64);
  const auto vectors = embed(corpus, "emb");
  SemDedupConfig cfg;
  cfg.n_clusters = 8;
  const auto st = run_semdedup(corpus, vectors, cfg, dir_ / "out", tok_, {"semdedup", "h"});
  EXPECT_EQ(st.docs_in, 200u);
  EXPECT_EQ(st.docs_out, 100u);
  EXPECT_DOUBLE_EQ(st.removal_fraction, 0.5);
  const auto kept = read_kept_ids(dir_ / "out" / kKeptIdsFile);
  EXPECT_EQ(kept.size(), 100u);
  EXPECT_TRUE(std::is_sorted(kept.begin(), kept.end()));
  const auto out = io::load_corpus(dir_ / "out");
  EXPECT_EQ(out.manifest.doc_count, 100u);
  ASSERT_EQ(out.manifest.provenance.size(), 2u);
  EXPECT_EQ(out.manifest.provenance.back().stage, "semdedup");
}

TEST_F(SemDedupStage, FarApartNothingRemoved) {
  Rng rng(12);
  const std::size_t dim = 64;
  auto raw = cftest::random_unit_vectors(rng, 150, dim);
  auto set = make_set(raw, dim, "d");
  double min_dist = 2.0;
  for (std::size_t a = 0; a < 150; ++a) {
    for (std::size_t b = a + 1; b < 150; ++b) min_dist = std::min(min_dist, cosine_distance(set.row(a), set.row(b)));
  }
  ASSERT_GT(min_dist, 0.15);
  std::vector<io::Document> docs;
  for (const auto& k : set.keys) docs.push_back(doc(k.id, "text of " + k.id));
  auto corpus = cftest::write_corpus(docs, dir_ / "in");
  SemDedupConfig cfg;
  cfg.n_clusters = 5;
  const auto st = run_semdedup(corpus, set, cfg, dir_ / "out", tok_, {"semdedup", "h"});
  EXPECT_EQ(st.docs_out, 150u);
}

TEST_F(SemDedupStage, PlantedPairsLoseExactlyOne) {
  Rng rng(13);
  const std::size_t dim = 64;
  // Ten topics: anchor plus an equal-length random offset, so same-topic
  // documents sit near cosine 0.5 of each other, far outside tau.
  auto anchors = cftest::random_unit_vectors(rng, 10, dim);
  std::vector<float> base;
  for (std::size_t i = 0; i < 350; ++i) {
    auto off = cftest::random_unit_vectors(rng, 1, dim);
    for (std::size_t j = 0; j < dim; ++j) off[j] += anchors[(i % 10) * dim + j];
    embedding::normalize(off);
    base.insert(base.end(), off.begin(), off.end());
  }
  auto set = make_set(base, dim, "o");
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < 150; ++i) {
    auto p = perturb(rng, set.row(i), 0.1);
    ASSERT_LT(cosine_distance(set.row(i), p), 0.1);
    char id[16];
    std::snprintf(id, sizeof(id), "p%05zu", i);
    set.append({id, id, std::nullopt}, p);
    pairs.emplace_back(i, set.size() - 1);
  }
  std::vector<io::Document> docs;
  for (const auto& k : set.keys) docs.push_back(doc(k.id, "body " + k.id));
  auto corpus = cftest::write_corpus(docs, dir_ / "in", 77);
  SemDedupConfig cfg;
  cfg.n_clusters = 10;
  cfg.tau = 0.15;
  cfg.seed = 4;
  const auto sel = semdedup_select(set, cfg);
  for (auto [a, b] : pairs) {
    ASSERT_EQ(sel.cluster_of[a], sel.cluster_of[b]);
    EXPECT_NE(sel.kept_rows[a], sel.kept_rows[b]);
  }
  EXPECT_EQ(sel.kept_rows, cftest::oracle::greedy_prune(set, sel.cluster_of, sel.model.centroids, 0.15,
                                                        cfg.keep, cfg.mode));
  const auto st = run_semdedup(corpus, set, cfg, dir_ / "out", tok_, {"semdedup", "h"});
  EXPECT_EQ(st.docs_out, 350u);
}

TEST_F(SemDedupStage, MissingEmbeddingIsFatalEmptyDocSkipped) {
  std::vector<io::Document> docs = {doc("a", "lathe spindle"), doc("b", "anode cathode"), doc("z", "")};
  auto corpus = cftest::write_corpus(docs, dir_ / "in");
  auto vectors = embed(corpus, "emb");
  EXPECT_EQ(vectors.size(), 2u);
  SemDedupConfig cfg;
  cfg.n_clusters = 1;
  const auto st = run_semdedup(corpus, vectors, cfg, dir_ / "out", tok_, {"semdedup", "h"});
  EXPECT_EQ(st.skipped_empty, 1u);
  EXPECT_EQ(st.docs_out, 2u);

  embedding::VectorSet partial;
  partial.dim = vectors.dim;
  partial.append(vectors.keys[0], vectors.row(0));
  try {
    run_semdedup(corpus, partial, cfg, dir_ / "out2", tok_, {"semdedup", "h"});
    FAIL();
  } catch (const StageError& e) {
    EXPECT_NE(std::string(e.what()).find(" b"), std::string::npos) << e.what();
  }
}

TEST_F(SemDedupStage, ChunkLevelSurvivalRule) {
  std::vector<io::Document> docs = {
      doc("a", "milling cutter spindle speed"),
      doc("b", "milling cutter spindle speed fuel cell"),  // one duplicate chunk, one new
      doc("c", "milling cutter spindle speed"),            // all chunks duplicated
  };
  auto corpus = cftest::write_corpus(docs, dir_ / "in");
  const auto vectors = embed(corpus, "emb", embedding::Level::Chunk, 4);
  EXPECT_EQ(vectors.size(), 4u);
  SemDedupConfig cfg;
  cfg.n_clusters = 1;
  cfg.level = embedding::Level::Chunk;
  cfg.tau = 0.05;
  run_semdedup(corpus, vectors, cfg, dir_ / "out", tok_, {"semdedup", "h"}, 4);
  EXPECT_EQ(read_kept_ids(dir_ / "out" / kKeptIdsFile), (std::vector<std::string>{"a", "b"}));

  cfg.chunk_corpus_output = true;
  run_semdedup(corpus, vectors, cfg, dir_ / "chunks", tok_, {"semdedup", "h"}, 4);
  EXPECT_EQ(read_kept_ids(dir_ / "chunks" / kKeptIdsFile), (std::vector<std::string>{"a#0", "b#1"}));
  io::ShardReader r(io::load_corpus(dir_ / "chunks"));
  auto first = r.next();
  ASSERT_TRUE(first);
  EXPECT_EQ(first->meta.at("parent"), "a");

  cfg = {};
  cfg.n_clusters = 1;
  EXPECT_THROW(run_semdedup(corpus, vectors, cfg, dir_ / "bad", tok_, {"semdedup", "h"}), ConfigError);
}

TEST_F(SemDedupStage, D4StageKeepsCeilPerCluster) {
  Rng rng(14);
  std::vector<io::Document> docs;
  for (int i = 0; i < 120; ++i) docs.push_back(doc("d" + std::to_string(100 + i), cftest::join(cftest::random_words(rng, i % 3, 40, 12))));
  auto corpus = cftest::write_corpus(docs, dir_ / "in");
  const auto vectors = embed(corpus, "emb");
  D4Config cfg;
  cfg.recluster_k = 3;
  const auto st = run_d4(corpus, vectors, cfg, dir_ / "out", tok_, {"d4", "h"});
  const auto sel = d4_select(vectors, cfg);
  std::size_t expect = 0;
  for (const auto& c : sel.clusters) expect += d4_retain_count(0.75, c.size);
  EXPECT_EQ(st.docs_out, expect);
  EXPECT_EQ(read_kept_ids(dir_ / "out" / kKeptIdsFile).size(), expect);
}
