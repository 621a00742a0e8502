#include "corpusforge/minhash/stage.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <queue>
#include <unordered_map>

#include "corpusforge/io/shards.hpp"
#include "corpusforge/util/binary.hpp"
#include "corpusforge/util/error.hpp"
#include "corpusforge/util/parallel.hpp"

namespace corpusforge::minhash {

namespace fs = std::filesystem;

namespace {

constexpr binary::Magic kSigMagic = binary::make_magic("CFMHSIG1");
constexpr binary::Magic kPairMagic = binary::make_magic("CFMHPAIR");
constexpr binary::Magic kClusterMagic = binary::make_magic("CFMHCLUS");
constexpr binary::Magic kRunMagic = binary::make_magic("CFMHRUN1");
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kSignBatch = 1024;

struct BandRecord {
  std::uint64_t key;
  std::uint32_t band;
  std::uint32_t doc;

  friend bool operator<(const BandRecord& a, const BandRecord& b) {
    if (a.band != b.band) return a.band < b.band;
    if (a.key != b.key) return a.key < b.key;
    return a.doc < b.doc;
  }
};
static_assert(sizeof(BandRecord) == 16);

fs::path temp_path(const fs::path& p) {
  fs::path t = p;
  t += ".tmp";
  return t;
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + p.string());
  return out;
}

void close_and_commit(std::ofstream& out, const fs::path& tmp, const fs::path& final_path) {
  out.flush();
  if (!out) throw IoError("failed writing " + tmp.string());
  out.close();
  fs::rename(tmp, final_path);
}

// Streams signature records from a signature file.
class SignatureReader {
 public:
  explicit SignatureReader(const fs::path& file) : in_(file, std::ios::binary) {
    if (!in_) throw IoError("cannot open " + file.string());
    if (binary::read_header(in_, kSigMagic, "signature") != kVersion) {
      throw IoError("unsupported signature file version");
    }
    params_.bands = binary::read_pod<std::int32_t>(in_);
    params_.rows_per_band = binary::read_pod<std::int32_t>(in_);
    params_.shingle_size = binary::read_pod<std::int32_t>(in_);
    params_.hash_seed = binary::read_pod<std::uint64_t>(in_);
    count_ = binary::read_pod<std::uint64_t>(in_);
  }

  const MinHashParams& params() const { return params_; }
  std::uint64_t count() const { return count_; }

  bool next(MinHashSignature& sig) {
    if (read_ >= count_) return false;
    sig.doc_id = binary::read_string(in_);
    sig.bands = params_.bands;
    sig.rows_per_band = params_.rows_per_band;
    sig.hash_seed = params_.hash_seed;
    sig.values.resize(params_.num_hashes());
    binary::read_array<std::uint64_t>(in_, sig.values);
    ++read_;
    return true;
  }

 private:
  std::ifstream in_;
  MinHashParams params_;
  std::uint64_t count_ = 0;
  std::uint64_t read_ = 0;
};

void write_run(const fs::path& path, std::span<const BandRecord> records) {
  auto out = open_out(path);
  binary::write_header(out, kRunMagic, kVersion);
  binary::write_pod<std::uint64_t>(out, records.size());
  binary::write_array<BandRecord>(out, records);
  out.flush();
  if (!out) throw IoError("failed writing sorted run " + path.string());
}

class RunReader {
 public:
  explicit RunReader(const fs::path& path) : in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open sorted run " + path.string());
    binary::read_header(in_, kRunMagic, "sorted run");
    remaining_ = binary::read_pod<std::uint64_t>(in_);
  }
  bool next(BandRecord& r) {
    if (remaining_ == 0) return false;
    r = binary::read_pod<BandRecord>(in_);
    --remaining_;
    return true;
  }

 private:
  std::ifstream in_;
  std::uint64_t remaining_ = 0;
};

}  // namespace

SignStats sign_corpus(const io::Corpus& corpus, const MinHashParams& params,
                      const fs::path& signatures_file, unsigned workers) {
  const MinHasher hasher(params);
  const fs::path tmp = temp_path(signatures_file);
  auto out = open_out(tmp);
  binary::write_header(out, kSigMagic, kVersion);
  binary::write_pod<std::int32_t>(out, params.bands);
  binary::write_pod<std::int32_t>(out, params.rows_per_band);
  binary::write_pod<std::int32_t>(out, params.shingle_size);
  binary::write_pod<std::uint64_t>(out, params.hash_seed);
  const auto count_pos = out.tellp();
  binary::write_pod<std::uint64_t>(out, 0);

  SignStats stats;
  io::ShardReader reader(corpus);
  std::vector<io::Document> batch;
  std::vector<MinHashSignature> sigs;
  auto flush = [&] {
    sigs.resize(batch.size());
    parallel_for(batch.size(), workers, [&](std::size_t i) {
      sigs[i] = hasher.sign_text(batch[i].text, batch[i].id);
    }, 16);
    for (const auto& s : sigs) {
      binary::write_string(out, s.doc_id);
      binary::write_array<std::uint64_t>(out, s.values);
    }
    stats.docs += batch.size();
    batch.clear();
  };
  while (auto doc = reader.next()) {
    batch.push_back(std::move(*doc));
    if (batch.size() == kSignBatch) flush();
  }
  flush();
  stats.malformed = reader.stats().malformed;

  out.seekp(count_pos);
  binary::write_pod<std::uint64_t>(out, stats.docs);
  close_and_commit(out, tmp, signatures_file);
  return stats;
}

SignatureFile read_signatures(const fs::path& signatures_file) {
  SignatureReader reader(signatures_file);
  SignatureFile out;
  out.params = reader.params();
  out.signatures.reserve(reader.count());
  MinHashSignature sig;
  while (reader.next(sig)) out.signatures.push_back(sig);
  return out;
}

BucketStats bucket_signatures(const fs::path& signatures_file, const fs::path& pairs_file,
                              const fs::path& work_dir, std::size_t run_records) {
  run_records = std::max<std::size_t>(run_records, 1);
  SignatureReader reader(signatures_file);
  if (reader.count() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error("too many documents for 32-bit pair indices");
  }
  fs::create_directories(work_dir);

  BucketStats stats;
  std::vector<BandRecord> buffer;
  buffer.reserve(std::min<std::size_t>(run_records, reader.count() * reader.params().bands + 1));
  std::vector<fs::path> runs;
  auto spill = [&] {
    std::sort(buffer.begin(), buffer.end());
    char name[32];
    std::snprintf(name, sizeof(name), "run-%05zu.bin", runs.size());
    runs.push_back(work_dir / name);
    write_run(runs.back(), buffer);
    buffer.clear();
  };

  MinHashSignature sig;
  std::uint32_t doc = 0;
  while (reader.next(sig)) {
    const auto keys = bucket_keys(sig);
    for (std::uint32_t band = 0; band < keys.size(); ++band) {
      buffer.push_back({keys[band], band, doc});
      ++stats.band_records;
      if (buffer.size() >= run_records) spill();
    }
    ++doc;
  }

  const fs::path tmp = temp_path(pairs_file);
  auto out = open_out(tmp);
  binary::write_header(out, kPairMagic, kVersion);
  const auto count_pos = out.tellp();
  binary::write_pod<std::uint64_t>(out, 0);

  // Group consecutive records with equal (band, key); link each to the first.
  bool have_group = false;
  BandRecord head{};
  auto consume = [&](const BandRecord& r) {
    if (have_group && r.band == head.band && r.key == head.key) {
      binary::write_pod<std::uint32_t>(out, head.doc);
      binary::write_pod<std::uint32_t>(out, r.doc);
      ++stats.candidate_pairs;
    } else {
      head = r;
      have_group = true;
    }
  };

  if (runs.empty()) {
    std::sort(buffer.begin(), buffer.end());
    for (const auto& r : buffer) consume(r);
  } else {
    if (!buffer.empty()) spill();
    std::vector<std::unique_ptr<RunReader>> readers;
    using Entry = std::pair<BandRecord, std::size_t>;
    auto greater = [](const Entry& a, const Entry& b) { return b.first < a.first; };
    std::priority_queue<Entry, std::vector<Entry>, decltype(greater)> heap(greater);
    for (const auto& run : runs) {
      readers.push_back(std::make_unique<RunReader>(run));
      BandRecord r{};
      if (readers.back()->next(r)) heap.emplace(r, readers.size() - 1);
    }
    while (!heap.empty()) {
      auto [r, src] = heap.top();
      heap.pop();
      consume(r);
      BandRecord nxt{};
      if (readers[src]->next(nxt)) heap.emplace(nxt, src);
    }
    readers.clear();
    for (const auto& run : runs) fs::remove(run);
  }
  stats.sorted_runs = runs.size();

  out.seekp(count_pos);
  binary::write_pod<std::uint64_t>(out, stats.candidate_pairs);
  close_and_commit(out, tmp, pairs_file);
  return stats;
}

std::vector<IndexPair> read_pairs(const fs::path& pairs_file) {
  std::ifstream in(pairs_file, std::ios::binary);
  if (!in) throw IoError("cannot open " + pairs_file.string());
  if (binary::read_header(in, kPairMagic, "pair list") != kVersion) {
    throw IoError("unsupported pair file version");
  }
  const auto n = binary::read_pod<std::uint64_t>(in);
  std::vector<IndexPair> pairs;
  pairs.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto a = binary::read_pod<std::uint32_t>(in);
    const auto b = binary::read_pod<std::uint32_t>(in);
    pairs.emplace_back(a, b);
  }
  return pairs;
}

void write_clusters(const DuplicateClusters& clusters, const fs::path& cluster_file) {
  const fs::path tmp = temp_path(cluster_file);
  auto out = open_out(tmp);
  binary::write_header(out, kClusterMagic, kVersion);
  binary::write_pod<std::uint64_t>(out, clusters.ids.size());
  for (std::size_t i = 0; i < clusters.ids.size(); ++i) {
    binary::write_string(out, clusters.ids[i]);
    binary::write_pod<std::uint32_t>(out, clusters.representative[i]);
  }
  close_and_commit(out, tmp, cluster_file);
}

DuplicateClusters read_clusters(const fs::path& cluster_file) {
  std::ifstream in(cluster_file, std::ios::binary);
  if (!in) throw IoError("cannot open " + cluster_file.string());
  if (binary::read_header(in, kClusterMagic, "cluster map") != kVersion) {
    throw IoError("unsupported cluster map version");
  }
  const auto n = binary::read_pod<std::uint64_t>(in);
  DuplicateClusters c;
  c.ids.reserve(n);
  c.representative.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    c.ids.push_back(binary::read_string(in));
    c.representative.push_back(binary::read_pod<std::uint32_t>(in));
    if (c.representative.back() >= n) throw IoError("corrupt cluster map");
  }
  return c;
}

DuplicateClusters cluster_signatures(const fs::path& signatures_file, const fs::path& pairs_file,
                                     const fs::path& cluster_file) {
  SignatureReader reader(signatures_file);
  std::vector<std::string> ids;
  ids.reserve(reader.count());
  MinHashSignature sig;
  while (reader.next(sig)) ids.push_back(std::move(sig.doc_id));
  const auto pairs = read_pairs(pairs_file);
  auto clusters = cluster(std::move(ids), pairs);
  write_clusters(clusters, cluster_file);
  return clusters;
}

DedupStats filter_duplicates(const DuplicateClusters& clusters, const io::Corpus& corpus,
                             const fs::path& out_dir, const io::Tokenizer& tokenizer,
                             const io::ProvenanceEntry& provenance, std::size_t max_per_shard) {
  std::unordered_map<std::string_view, bool> kept;
  kept.reserve(clusters.ids.size());
  for (std::size_t i = 0; i < clusters.ids.size(); ++i) kept.emplace(clusters.ids[i], clusters.is_kept(i));

  DedupStats stats;
  stats.clusters = clusters.num_clusters();
  io::ShardReader reader(corpus);
  io::ShardWriter writer(out_dir, {.max_per_shard = max_per_shard}, tokenizer);
  while (auto doc = reader.next()) {
    const std::uint64_t tokens = io::ensure_token_count(*doc, tokenizer);
    ++stats.docs_in;
    stats.tokens_in += tokens;
    auto it = kept.find(doc->id);
    if (it != kept.end() && !it->second) {
      ++stats.removed;
      continue;
    }
    ++stats.docs_out;
    stats.tokens_out += tokens;
    writer.write(std::move(*doc));
  }
  auto prov = corpus.manifest.provenance;
  prov.push_back(provenance);
  writer.finish(std::move(prov));
  return stats;
}

}  // namespace corpusforge::minhash
