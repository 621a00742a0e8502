#include <gtest/gtest.h>

#include <cmath>

#include "corpusforge/embedding/chunker.hpp"
#include "corpusforge/embedding/embedder.hpp"
#include "corpusforge/embedding/stage.hpp"
#include "corpusforge/embedding/vector_store.hpp"
#include "corpusforge/io/shards.hpp"
#include "corpusforge/io/tokenizer.hpp"
#include "corpusforge/util/error.hpp"
#include "synthetic.hpp"

using namespace corpusforge;
using namespace corpusforge::embedding;
using cftest::Rng;
using cftest::TempDir;

namespace {

io::Document doc(std::string id, std::string text) { return {std::move(id), std::move(text), {}, std::nullopt}; }

std::string numbered_words(std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += (i % 7 == 0) ? "\n" : " ";
    s += "w" + std::to_string(i);
  }
  return s;
}

// Straight from the definition: FNV-1a of the lowercased token with the
// seed folded into the basis, a count per bucket, jitter, unit length.
std::vector<double> oracle_embed(const std::string& text, std::size_t dim, std::uint64_t seed) {
  auto mix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  std::vector<double> v(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    v[j] = 1e-3 * (static_cast<double>(mix(seed ^ mix(j)) >> 11) / 9007199254740992.0 - 0.5);
  }
  std::string tok;
  auto flush = [&] {
    if (tok.empty()) return;
    std::uint64_t h = 14695981039346656037ULL ^ seed;
    for (unsigned char c : tok) {
      h ^= static_cast<unsigned char>(std::tolower(c));
      h *= 1099511628211ULL;
    }
    v[h % dim] += 1.0;
    tok.clear();
  };
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n') {
      flush();
    } else {
      tok += c;
    }
  }
  flush();
  double n = 0;
  for (double x : v) n += x * x;
  for (double& x : v) x /= std::sqrt(n);
  return v;
}

double cosine(std::span<const float> a, std::span<const float> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

// Embedder that fails after a fixed number of calls, to interrupt a stage.
class FlakyEmbedder final : public Embedder {
 public:
  FlakyEmbedder(std::size_t dim, int calls_before_failure) : inner_(dim, 2), left_(calls_before_failure) {}
  std::size_t dim() override { return inner_.dim(); }
  std::string name() override { return inner_.name(); }
  std::vector<std::vector<float>> embed(std::span<const std::string> texts) override {
    if (left_-- <= 0) throw StageError("embedder went away");
    return inner_.embed(texts);
  }

 private:
  HashingEmbedder inner_;
  int left_;
};

}  // namespace

TEST(Chunker, ExactTiling) {
  io::WhitespaceTokenizer tok;
  for (auto [n, expect] : std::vector<std::pair<std::size_t, std::vector<std::size_t>>>{
           {1024, {512, 512}}, {513, {512, 1}}, {100, {100}}, {0, {}}}) {
    const auto chunks = chunk_document(doc("d", numbered_words(n)), tok, 512);
    std::vector<std::size_t> sizes;
    for (const auto& c : chunks) sizes.push_back(c.token_end - c.token_begin);
    EXPECT_EQ(sizes, expect) << n;
  }
}

TEST(Chunker, SpansTileAndTextsReproduceTokens) {
  io::WhitespaceTokenizer tok;
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    const std::string text = "  " + numbered_words(rng.uniform_index(300)) + "\t";
    const std::size_t m = 1 + rng.uniform_index(40);
    const auto chunks = chunk_document(doc("d", text), tok, m);
    const auto spans = tok.tokenize(text);
    EXPECT_EQ(chunks.size(), (spans.size() + m - 1) / m);
    std::vector<std::string> rebuilt;
    std::size_t expect_begin = 0;
    for (std::size_t k = 0; k < chunks.size(); ++k) {
      const auto& c = chunks[k];
      EXPECT_EQ(c.index, k);
      EXPECT_EQ(c.token_begin, expect_begin);
      EXPECT_LE(c.token_end - c.token_begin, m);
      EXPECT_EQ(c.id(), "d#" + std::to_string(k));
      expect_begin = c.token_end;
      for (const auto& s : tok.tokenize(c.text)) rebuilt.push_back(c.text.substr(s.offset, s.length));
    }
    EXPECT_EQ(expect_begin, spans.size());
    std::vector<std::string> original;
    for (const auto& s : spans) original.push_back(text.substr(s.offset, s.length));
    EXPECT_EQ(rebuilt, original);
  }
}

TEST(HashingEmbedder, MatchesIndependentReimplementation) {
  Rng rng(2);
  for (std::size_t dim : {1u, 7u, 64u, 1024u}) {
    for (std::uint64_t seed : {0ull, 9ull}) {
      HashingEmbedder e(dim, seed);
      for (int t = 0; t < 10; ++t) {
        auto words = cftest::random_words(rng, 0, 30, rng.uniform_index(25));
        if (!words.empty()) words[0] = "MiXeD";
        const std::string text = cftest::join(words);
        const auto got = e.embed_one(text);
        const auto want = oracle_embed(text, dim, seed);
        for (std::size_t j = 0; j < dim; ++j) EXPECT_NEAR(got[j], want[j], 1e-6);
        EXPECT_NEAR(l2_norm(got), 1.0, 1e-6);
      }
    }
  }
}

TEST(HashingEmbedder, DeterministicAndOrdered) {
  HashingEmbedder e(64, 3);
  std::vector<std::string> texts = {"alpha beta", "gamma", "alpha beta"};
  const auto v = e.embed(texts);
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v[0], v[2]);
  EXPECT_EQ(v[1], e.embed_one("gamma"));
  EXPECT_THROW(HashingEmbedder(0), ConfigError);
}

TEST(MeanPool, DefinitionalCases) {
  HashingEmbedder e(64, 1);
  const auto u = e.embed_one("spindle");
  const std::vector<std::vector<float>> one = {u};
  EXPECT_EQ(mean_pool(one), u);
  const std::vector<std::vector<float>> same = {u, u};
  const auto m = mean_pool(same);
  for (std::size_t j = 0; j < 64; ++j) EXPECT_NEAR(m[j], u[j], 1e-7);
}

TEST(EmbedDocument, TwoNearOrthogonalChunks) {
  // One token per chunk; two tokens landing in different buckets give chunk
  // vectors that are orthogonal up to the jitter.
  HashingEmbedder e(64, 4);
  io::WhitespaceTokenizer tok;
  const auto u = e.embed_one("lathe");
  const auto v = e.embed_one("anode");
  const double c = cosine(u, v);
  ASSERT_LT(std::abs(c), 1e-2);
  const auto d = embed_document(doc("x", "lathe anode"), e, tok, 1);
  ASSERT_TRUE(d);
  EXPECT_NEAR(l2_norm(d->values), 1.0, 1e-6);
  // normalized (u+v)/2 has cosine sqrt((1+c)/2) to each
  EXPECT_NEAR(cosine(d->values, u), std::sqrt((1 + c) / 2), 1e-6);
  EXPECT_NEAR(cosine(d->values, v), std::sqrt((1 + c) / 2), 1e-6);
  EXPECT_NEAR(cosine(d->values, u), 1 / std::sqrt(2.0), 1e-2);
  EXPECT_FALSE(embed_document(doc("e", ""), e, tok));
}

TEST(EmbedChunks, DimensionMismatchIsFatal) {
  class Liar final : public Embedder {
   public:
    std::size_t dim() override { return 4; }
    std::string name() override { return "liar"; }
    std::vector<std::vector<float>> embed(std::span<const std::string> t) override {
      return std::vector<std::vector<float>>(t.size(), std::vector<float>(3, 1.0f));
    }
  } liar;
  io::WhitespaceTokenizer tok;
  const auto chunks = chunk_document(doc("d", "a b c"), tok, 2);
  EXPECT_THROW(embed_chunks(chunks, liar), Error);
}

TEST(VectorStore, RoundTripAndResumeTruncation) {
  TempDir dir;
  Rng rng(5);
  VectorSet set;
  set.dim = 5;
  const auto raw = cftest::random_unit_vectors(rng, 9, 5);
  for (std::size_t i = 0; i < 9; ++i) {
    set.append({"d" + std::to_string(i / 3) + "#" + std::to_string(i % 3), "d" + std::to_string(i / 3), i % 3},
               std::span<const float>(raw.data() + i * 5, 5));
  }
  set.append({"solo", "solo", std::nullopt}, std::span<const float>(raw.data(), 5));
  write_vectors(set, dir / "v.f32");
  const auto back = read_vectors(dir / "v.f32");
  EXPECT_EQ(back.dim, 5u);
  EXPECT_EQ(back.keys, set.keys);
  EXPECT_EQ(back.data, set.data);

  {
    VectorWriter w(dir / "v.f32", 5, 4);
    w.append({"new", "new", std::nullopt}, std::span<const float>(raw.data() + 40, 5));
    w.commit();
  }
  const auto resumed = read_vectors(dir / "v.f32");
  ASSERT_EQ(resumed.size(), 5u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(resumed.keys[i], set.keys[i]);
  EXPECT_EQ(resumed.keys[4].id, "new");

  io::write_file_atomic(dir / "bad.f32", "CFVECF32garbage");
  EXPECT_THROW(read_vectors(dir / "bad.f32"), IoError);
}

class EmbedStage : public ::testing::Test {
 protected:
  void SetUp() override {
    Rng rng(6);
    for (int i = 0; i < 90; ++i) {
      docs_.push_back(doc("doc-" + std::to_string(i), i == 17 ? "" : numbered_words(1 + rng.uniform_index(60))));
    }
    corpus_ = cftest::write_corpus(docs_, dir_ / "in", 20);
    opt_.max_tokens = 16;
    opt_.docs_per_batch = 8;
    opt_.request_batch = 5;
  }
  TempDir dir_;
  std::vector<io::Document> docs_;
  io::Corpus corpus_;
  io::WhitespaceTokenizer tok_;
  EmbedStageOptions opt_;
};

TEST_F(EmbedStage, DocLevelOneUnitVectorPerNonEmptyDoc) {
  HashingEmbedder e(32, 2);
  const auto st = embed_corpus(corpus_, e, tok_, dir_ / "out", opt_);
  EXPECT_EQ(st.docs, 90u);
  EXPECT_EQ(st.skipped_empty, 1u);
  EXPECT_EQ(st.vectors, 89u);
  const auto v = read_vectors(dir_ / "out" / kVectorsFile);
  ASSERT_EQ(v.size(), 89u);
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_NEAR(l2_norm(v.row(i)), 1.0, 1e-6);
    EXPECT_EQ(v.keys[i].id, v.keys[i].doc);
    EXPECT_FALSE(v.keys[i].chunk);
  }
  const auto direct = embed_document(docs_[3], e, tok_, 16);
  ASSERT_EQ(v.keys[3].id, "doc-3");
  for (std::size_t j = 0; j < 32; ++j) EXPECT_EQ(v.row(3)[j], direct->values[j]);
}

TEST_F(EmbedStage, ChunkLevelRowsPerChunk) {
  HashingEmbedder e(32, 2);
  opt_.level = Level::Chunk;
  const auto st = embed_corpus(corpus_, e, tok_, dir_ / "out", opt_);
  std::uint64_t chunks = 0;
  for (const auto& d : docs_) chunks += chunk_document(d, tok_, 16).size();
  EXPECT_EQ(st.vectors, chunks);
  const auto v = read_vectors(dir_ / "out" / kVectorsFile);
  ASSERT_EQ(v.size(), chunks);
  EXPECT_EQ(v.keys[0].id, "doc-0#0");
  EXPECT_EQ(v.keys[0].doc, "doc-0");
  EXPECT_EQ(v.keys[0].chunk, std::optional<std::uint64_t>(0));
}

TEST_F(EmbedStage, ResumeAfterFailureIsByteIdentical) {
  HashingEmbedder clean(32, 2);
  embed_corpus(corpus_, clean, tok_, dir_ / "clean", opt_);

  FlakyEmbedder flaky(32, 9);
  EXPECT_THROW(embed_corpus(corpus_, flaky, tok_, dir_ / "resumed", opt_), StageError);
  HashingEmbedder again(32, 2);
  const auto st = embed_corpus(corpus_, again, tok_, dir_ / "resumed", opt_);
  EXPECT_GT(st.resumed_docs, 0u);
  EXPECT_LT(st.resumed_docs, 90u);
  EXPECT_EQ(st.docs, 90u);

  EXPECT_EQ(io::read_file(dir_ / "clean" / kVectorsFile), io::read_file(dir_ / "resumed" / kVectorsFile));
  EXPECT_EQ(io::read_file(ids_path(dir_ / "clean" / kVectorsFile)), io::read_file(ids_path(dir_ / "resumed" / kVectorsFile)));
}

TEST_F(EmbedStage, PermutationLeavesEachVectorUnchanged) {
  HashingEmbedder e(32, 2);
  embed_corpus(corpus_, e, tok_, dir_ / "a", opt_);
  auto shuffled = docs_;
  Rng rng(7);
  rng.shuffle(std::span<io::Document>(shuffled));
  embed_corpus(cftest::write_corpus(shuffled, dir_ / "in2", 13), e, tok_, dir_ / "b", opt_);
  const auto a = read_vectors(dir_ / "a" / kVectorsFile);
  const auto b = read_vectors(dir_ / "b" / kVectorsFile);
  std::map<std::string, std::vector<float>> by_id;
  for (std::size_t i = 0; i < a.size(); ++i) by_id[a.keys[i].id].assign(a.row(i).begin(), a.row(i).end());
  ASSERT_EQ(b.size(), a.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    EXPECT_EQ(by_id.at(b.keys[i].id), std::vector<float>(b.row(i).begin(), b.row(i).end()));
  }
}

TEST_F(EmbedStage, WorkerCountInvariant) {
  HashingEmbedder e(32, 2);
  opt_.workers = 1;
  embed_corpus(corpus_, e, tok_, dir_ / "w1", opt_);
  opt_.workers = 16;
  embed_corpus(corpus_, e, tok_, dir_ / "w16", opt_);
  EXPECT_EQ(io::read_file(dir_ / "w1" / kVectorsFile), io::read_file(dir_ / "w16" / kVectorsFile));
}
