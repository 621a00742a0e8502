#include <benchmark/benchmark.h>

#include <cmath>
#include <string>
#include <vector>

#include "corpusforge/classifier/linear_classifier.hpp"
#include "corpusforge/classifier/threshold.hpp"
#include "corpusforge/embedding/embedder.hpp"
#include "corpusforge/minhash/clusters.hpp"
#include "corpusforge/minhash/minhash.hpp"
#include "corpusforge/semdedup/kmeans.hpp"
#include "corpusforge/semdedup/prune.hpp"
#include "corpusforge/util/rng.hpp"

using namespace corpusforge;

namespace {

std::string random_text(Rng& rng, std::size_t words, std::size_t vocab = 5000) {
  std::string s;
  for (std::size_t i = 0; i < words; ++i) {
    if (i) s += ' ';
    s += "w" + std::to_string(rng.uniform_index(vocab));
  }
  return s;
}

std::vector<float> unit_vectors(Rng& rng, std::size_t n, std::size_t dim) {
  std::vector<float> v(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    double norm = 0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double x = rng.uniform01() - 0.5;
      v[i * dim + j] = static_cast<float>(x);
      norm += x * x;
    }
    for (std::size_t j = 0; j < dim; ++j) v[i * dim + j] = static_cast<float>(v[i * dim + j] / std::sqrt(norm));
  }
  return v;
}

void BM_Shingle(benchmark::State& state) {
  Rng rng(1);
  const auto text = random_text(rng, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(minhash::shingle(text, 5));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Shingle)->Arg(100)->Arg(1000)->Arg(10000);

void BM_MinHashSign(benchmark::State& state) {
  Rng rng(2);
  const auto shingles = minhash::shingle(random_text(rng, state.range(0)), 5);
  const minhash::MinHasher h({20, 20, 5, 0});
  for (auto _ : state) benchmark::DoNotOptimize(h.sign(shingles));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(shingles.size()));
}
BENCHMARK(BM_MinHashSign)->Arg(100)->Arg(1000)->Arg(10000);

void BM_BucketKeys(benchmark::State& state) {
  Rng rng(3);
  const minhash::MinHasher h({20, 20, 5, 0});
  const auto sig = h.sign_text(random_text(rng, 500));
  for (auto _ : state) benchmark::DoNotOptimize(minhash::bucket_keys(sig));
}
BENCHMARK(BM_BucketKeys);

void BM_UnionFindCluster(benchmark::State& state) {
  Rng rng(4);
  const auto n = static_cast<std::uint32_t>(state.range(0));
  std::vector<std::string> ids;
  for (std::uint32_t i = 0; i < n; ++i) ids.push_back("d" + std::to_string(i));
  std::vector<minhash::IndexPair> pairs;
  for (std::uint32_t i = 0; i < n; ++i) {
    pairs.emplace_back(static_cast<std::uint32_t>(rng.uniform_index(n)), static_cast<std::uint32_t>(rng.uniform_index(n)));
  }
  for (auto _ : state) benchmark::DoNotOptimize(minhash::cluster(ids, pairs));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_UnionFindCluster)->Arg(10000)->Arg(100000);

void BM_KMeans(benchmark::State& state) {
  Rng rng(5);
  const std::size_t n = state.range(0), dim = 64;
  const auto pts = unit_vectors(rng, n, dim);
  semdedup::KMeansOptions o;
  o.k = static_cast<std::size_t>(state.range(1));
  o.max_iters = 20;
  o.workers = 4;
  for (auto _ : state) benchmark::DoNotOptimize(semdedup::kmeans_fit({pts, n, dim}, o));
}
BENCHMARK(BM_KMeans)->Args({2000, 16})->Args({10000, 64})->Unit(benchmark::kMillisecond);

void BM_PruneCluster(benchmark::State& state) {
  Rng rng(6);
  const std::size_t n = state.range(0), dim = 384;
  const auto v = unit_vectors(rng, n, dim);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("d" + std::to_string(i));
  std::vector<semdedup::ClusterMember> members;
  for (std::size_t i = 0; i < n; ++i) members.push_back({ids[i], {v.data() + i * dim, dim}, rng.uniform01()});
  for (auto _ : state) {
    benchmark::DoNotOptimize(semdedup::prune_cluster(members, 0.15, semdedup::KeepPolicy::FarthestFromCentroid));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_PruneCluster)->Arg(100)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_ClassifierPredict(benchmark::State& state) {
  Rng rng(7);
  classifier::LinearClassifier model(classifier::FeaturizerConfig{}, 16);
  const auto text = random_text(rng, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(text));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ClassifierPredict)->Arg(100)->Arg(1000);

void BM_CalibrateThreshold(benchmark::State& state) {
  Rng rng(8);
  std::vector<classifier::ScoredDoc> scores(state.range(0));
  std::uint64_t total = 0;
  for (auto& s : scores) {
    s.score = rng.uniform01();
    s.tokens = 1 + rng.uniform_index(2000);
    total += s.tokens;
  }
  for (auto _ : state) benchmark::DoNotOptimize(classifier::calibrate_threshold(scores, total / 7));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CalibrateThreshold)->Arg(10000)->Arg(1000000)->Unit(benchmark::kMillisecond);

void BM_HashingEmbedder(benchmark::State& state) {
  Rng rng(9);
  std::vector<std::string> texts;
  for (int i = 0; i < 64; ++i) texts.push_back(random_text(rng, 512));
  embedding::HashingEmbedder e(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(e.embed(texts));
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_HashingEmbedder)->Arg(384)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();
