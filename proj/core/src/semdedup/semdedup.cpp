#include "corpusforge/semdedup/semdedup.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "corpusforge/embedding/chunker.hpp"
#include "corpusforge/io/shards.hpp"
#include "corpusforge/util/error.hpp"
#include "corpusforge/util/hash.hpp"
#include "corpusforge/util/parallel.hpp"

namespace corpusforge::semdedup {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

MatrixView view_of(const embedding::VectorSet& vectors) {
  return {vectors.data, vectors.size(), vectors.dim};
}

// Rows of one cluster together with their own centroid distances.
struct Group {
  std::vector<std::uint32_t> rows;
  std::vector<double> dist;
};

// Splits a group with 2-means until every part fits under the cap.
void split_group(const embedding::VectorSet& vectors, Group group, std::size_t cap,
                 std::uint64_t seed, const SemDedupConfig& cfg, std::vector<Group>& out) {
  if (group.rows.size() <= cap) {
    out.push_back(std::move(group));
    return;
  }
  std::vector<float> sub;
  sub.reserve(group.rows.size() * vectors.dim);
  for (auto r : group.rows) {
    const auto v = vectors.row(r);
    sub.insert(sub.end(), v.begin(), v.end());
  }
  const auto model = kmeans_fit({sub, group.rows.size(), vectors.dim},
                                {.k = 2, .seed = seed, .max_iters = cfg.max_iters, .tol = cfg.tol});
  Group parts[2];
  for (std::size_t i = 0; i < group.rows.size(); ++i) {
    auto& p = parts[model.assignments[i]];
    p.rows.push_back(group.rows[i]);
    p.dist.push_back(std::sqrt(model.sq_distances[i]));
  }
  if (parts[0].rows.empty() || parts[1].rows.empty()) {
    // All points coincide; nothing left to split on.
    out.push_back(std::move(group));
    return;
  }
  split_group(vectors, std::move(parts[0]), cap, mix64(seed ^ 1), cfg, out);
  split_group(vectors, std::move(parts[1]), cap, mix64(seed ^ 2), cfg, out);
}

void check_unit_rows(const embedding::VectorSet& vectors) {
  if (vectors.dim == 0) throw ConfigError("vector set has dimension 0");
  if (vectors.data.size() != vectors.size() * vectors.dim) throw Error("vector set size mismatch");
}

std::string level_name(embedding::Level level) {
  return level == embedding::Level::Document ? "doc" : "chunk";
}

void write_kept_ids(std::vector<std::string> ids, const fs::path& file) {
  std::sort(ids.begin(), ids.end());
  std::string out;
  for (const auto& id : ids) {
    out += json(id).dump();
    out += '\n';
  }
  io::write_file_atomic(file, out);
}

void write_cluster_map(const embedding::VectorSet& vectors,
                       const std::vector<std::uint32_t>& cluster_of, const fs::path& file) {
  std::string out;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    out += json::array({vectors.keys[i].id, cluster_of[i]}).dump();
    out += '\n';
  }
  io::write_file_atomic(file, out);
}

void write_centroids(const KMeansModel& model, const fs::path& file) {
  embedding::VectorSet set;
  set.dim = model.dim;
  std::vector<float> row(model.dim);
  for (std::size_t c = 0; c < model.k; ++c) {
    const auto src = model.centroid(c);
    std::transform(src.begin(), src.end(), row.begin(),
                   [](double x) { return static_cast<float>(x); });
    const std::string id = "centroid-" + std::to_string(c);
    set.append({id, id, std::nullopt}, row);
  }
  embedding::write_vectors(set, file);
}

json cluster_json(const Selection& sel) {
  json arr = json::array();
  for (const auto& c : sel.clusters) {
    arr.push_back({{"cluster", c.cluster}, {"size", c.size}, {"kept", c.kept}});
  }
  return arr;
}

// Keeps only rows that belong to non-empty corpus documents and fails if a
// non-empty document has no row.
struct Aligned {
  embedding::VectorSet vectors;
  std::uint64_t docs_in = 0;
  std::uint64_t tokens_in = 0;
  std::uint64_t skipped_empty = 0;
};

Aligned align(const io::Corpus& corpus, const embedding::VectorSet& vectors,
              const io::Tokenizer& tokenizer, bool doc_level) {
  std::unordered_set<std::string> wanted;
  Aligned a;
  io::ShardReader reader(corpus);
  while (auto doc = reader.next()) {
    const auto tokens = io::ensure_token_count(*doc, tokenizer);
    ++a.docs_in;
    a.tokens_in += tokens;
    if (tokens == 0) {
      ++a.skipped_empty;
      continue;
    }
    wanted.insert(std::move(doc->id));
  }

  std::unordered_set<std::string_view> covered;
  std::unordered_set<std::string_view> seen_rows;
  a.vectors.dim = vectors.dim;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const auto& key = vectors.keys[i];
    auto it = wanted.find(key.doc);
    if (it == wanted.end()) continue;
    if (doc_level && key.chunk) {
      throw ConfigError("document-level deduplication needs document-level embeddings; got chunk " +
                        key.id);
    }
    if (!seen_rows.insert(key.id).second) throw Error("duplicate embedding id " + key.id);
    covered.insert(*it);
    a.vectors.append(key, vectors.row(i));
  }

  if (covered.size() != wanted.size()) {
    std::vector<std::string> missing;
    for (const auto& id : wanted) {
      if (!covered.count(id)) missing.push_back(id);
    }
    std::sort(missing.begin(), missing.end());
    std::ostringstream msg;
    msg << missing.size() << " document(s) have no embedding:";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg << ' ' << missing[i];
    if (missing.size() > 20) msg << " ...";
    throw StageError(msg.str());
  }
  return a;
}

}  // namespace

void SemDedupConfig::validate() const {
  if (n_clusters < 1) throw ConfigError("n_clusters must be >= 1");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must be in [0, 1]");
  if (max_cluster_size < 1) throw ConfigError("max_cluster_size must be >= 1");
  if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
  if (chunk_corpus_output && level != embedding::Level::Chunk) {
    throw ConfigError("chunk corpus output requires chunk level");
  }
}

void D4Config::validate() const {
  if (recluster_k < 1) throw ConfigError("recluster_k must be >= 1");
  if (!(r_proto > 0.0 && r_proto <= 1.0)) throw ConfigError("r_proto must be in (0, 1]");
  if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
}

std::size_t Selection::kept_count() const {
  return static_cast<std::size_t>(std::count(kept_rows.begin(), kept_rows.end(), true));
}

Selection semdedup_select(const embedding::VectorSet& vectors, const SemDedupConfig& config) {
  config.validate();
  check_unit_rows(vectors);
  Selection sel;
  sel.model = kmeans_fit(view_of(vectors), {.k = config.n_clusters,
                                            .seed = config.seed,
                                            .max_iters = config.max_iters,
                                            .tol = config.tol,
                                            .workers = config.workers});
  const std::size_t k = sel.model.k;
  const std::size_t n = vectors.size();

  std::vector<Group> top(k);
  for (std::size_t i = 0; i < n; ++i) {
    auto& g = top[sel.model.assignments[i]];
    g.rows.push_back(static_cast<std::uint32_t>(i));
    g.dist.push_back(std::sqrt(sel.model.sq_distances[i]));
  }

  std::vector<std::vector<Group>> parts(k);
  std::vector<std::vector<std::vector<std::size_t>>> kept(k);
  parallel_for(k, config.workers, [&](std::size_t c) {
    split_group(vectors, std::move(top[c]), config.max_cluster_size,
                mix64(config.seed ^ mix64(c + 1)), config, parts[c]);
    for (const auto& g : parts[c]) {
      std::vector<ClusterMember> members;
      members.reserve(g.rows.size());
      for (std::size_t m = 0; m < g.rows.size(); ++m) {
        members.push_back({vectors.keys[g.rows[m]].id, vectors.row(g.rows[m]), g.dist[m]});
      }
      kept[c].push_back(prune_cluster(members, config.tau, config.keep, config.mode));
    }
  }, 1);

  // Unsplit clusters keep their K-means id; split parts are numbered after k.
  sel.cluster_of.assign(n, 0);
  sel.kept_rows.assign(n, false);
  std::uint32_t next_id = static_cast<std::uint32_t>(k);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t p = 0; p < parts[c].size(); ++p) {
      const auto& g = parts[c][p];
      const std::uint32_t id = parts[c].size() == 1 ? static_cast<std::uint32_t>(c) : next_id++;
      for (auto r : g.rows) sel.cluster_of[r] = id;
      for (auto m : kept[c][p]) sel.kept_rows[g.rows[m]] = true;
      sel.clusters.push_back({id, g.rows.size(), kept[c][p].size()});
    }
    if (parts[c].empty()) sel.clusters.push_back({static_cast<std::uint32_t>(c), 0, 0});
  }
  std::sort(sel.clusters.begin(), sel.clusters.end(),
            [](const ClusterStats& a, const ClusterStats& b) { return a.cluster < b.cluster; });
  return sel;
}

SemDedupStats run_semdedup(const io::Corpus& corpus, const embedding::VectorSet& vectors,
                           const SemDedupConfig& config, const fs::path& out_dir,
                           const io::Tokenizer& tokenizer, const io::ProvenanceEntry& provenance,
                           std::size_t max_tokens, std::size_t max_per_shard) {
  config.validate();
  const bool doc_level = config.level == embedding::Level::Document;
  auto t0 = std::chrono::steady_clock::now();
  auto aligned = align(corpus, vectors, tokenizer, doc_level);
  SemDedupStats stats;
  stats.docs_in = aligned.docs_in;
  stats.tokens_in = aligned.tokens_in;
  stats.skipped_empty = aligned.skipped_empty;
  stats.vectors = aligned.vectors.size();

  auto sel = semdedup_select(aligned.vectors, config);
  stats.clustering_seconds = seconds_since(t0);
  stats.vectors_kept = sel.kept_count();

  t0 = std::chrono::steady_clock::now();
  std::unordered_set<std::string> kept_docs;
  std::unordered_set<std::string> kept_chunks;
  for (std::size_t i = 0; i < aligned.vectors.size(); ++i) {
    if (!sel.kept_rows[i]) continue;
    const auto& key = aligned.vectors.keys[i];
    kept_docs.insert(key.doc);
    if (!doc_level) kept_chunks.insert(key.id);
  }
  stats.dedup_seconds = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  fs::create_directories(out_dir);
  std::vector<std::string> kept_ids;
  {
    io::ShardReader reader(corpus);
    io::ShardWriter writer(out_dir, {.max_per_shard = max_per_shard}, tokenizer);
    while (auto doc = reader.next()) {
      if (!kept_docs.count(doc->id)) continue;
      if (config.chunk_corpus_output) {
        for (auto& chunk : embedding::chunk_document(*doc, tokenizer, max_tokens)) {
          const std::string id = chunk.id();
          if (!kept_chunks.count(id)) continue;
          io::Document out{id, std::move(chunk.text), doc->meta, std::nullopt};
          out.meta["parent"] = doc->id;
          kept_ids.push_back(id);
          ++stats.docs_out;
          stats.tokens_out += io::ensure_token_count(out, tokenizer);
          writer.write(std::move(out));
        }
        continue;
      }
      kept_ids.push_back(doc->id);
      ++stats.docs_out;
      stats.tokens_out += io::ensure_token_count(*doc, tokenizer);
      writer.write(std::move(*doc));
    }
    auto prov = corpus.manifest.provenance;
    prov.push_back(provenance);
    writer.finish(std::move(prov));
  }
  stats.removal_fraction =
      stats.docs_in == 0 ? 0.0
                         : 1.0 - static_cast<double>(stats.docs_out) /
                                     static_cast<double>(stats.docs_in);

  write_kept_ids(std::move(kept_ids), out_dir / kKeptIdsFile);
  write_cluster_map(aligned.vectors, sel.cluster_of, out_dir / kClusterMapFile);
  write_centroids(sel.model, out_dir / kCentroidsFile);
  json report = {{"stage", "semdedup"},
                 {"n_clusters", config.n_clusters},
                 {"tau", config.tau},
                 {"level", level_name(config.level)},
                 {"docs_in", stats.docs_in},
                 {"docs_out", stats.docs_out},
                 {"skipped_empty", stats.skipped_empty},
                 {"vectors", stats.vectors},
                 {"vectors_kept", stats.vectors_kept},
                 {"removal_fraction", stats.removal_fraction},
                 {"kmeans_iterations", sel.model.iterations_run},
                 {"inertia", sel.model.inertia},
                 {"clusters", cluster_json(sel)}};
  io::write_file_atomic(out_dir / kReportFile, report.dump(2) + "\n");
  stats.filtering_seconds = seconds_since(t0);
  return stats;
}

std::size_t d4_retain_count(double r_proto, std::size_t m) {
  if (m == 0) return 0;
  const double x = r_proto * static_cast<double>(m);
  // r * m can land a hair above an integer (0.7 * 10 = 7.000000000000001).
  auto c = static_cast<std::size_t>(std::ceil(x - 1e-9 * std::max(1.0, x)));
  return std::clamp<std::size_t>(c, 1, m);
}

Selection d4_select(const embedding::VectorSet& vectors, const D4Config& config) {
  config.validate();
  check_unit_rows(vectors);
  Selection sel;
  sel.model = kmeans_fit(view_of(vectors), {.k = config.recluster_k,
                                            .seed = config.seed,
                                            .max_iters = config.max_iters,
                                            .tol = config.tol,
                                            .workers = config.workers});
  const std::size_t n = vectors.size();
  sel.cluster_of = sel.model.assignments;
  sel.kept_rows.assign(n, false);
  std::vector<std::vector<std::uint32_t>> members(sel.model.k);
  for (std::size_t i = 0; i < n; ++i) members[sel.model.assignments[i]].push_back(i);
  for (std::size_t c = 0; c < sel.model.k; ++c) {
    auto& rows = members[c];
    std::sort(rows.begin(), rows.end(), [&](std::uint32_t a, std::uint32_t b) {
      if (sel.model.sq_distances[a] != sel.model.sq_distances[b]) {
        return sel.model.sq_distances[a] > sel.model.sq_distances[b];
      }
      return vectors.keys[a].id < vectors.keys[b].id;
    });
    const std::size_t keep = d4_retain_count(config.r_proto, rows.size());
    for (std::size_t j = 0; j < keep; ++j) sel.kept_rows[rows[j]] = true;
    sel.clusters.push_back({static_cast<std::uint32_t>(c), rows.size(), keep});
  }
  return sel;
}

SemDedupStats run_d4(const io::Corpus& corpus, const embedding::VectorSet& vectors,
                     const D4Config& config, const fs::path& out_dir,
                     const io::Tokenizer& tokenizer, const io::ProvenanceEntry& provenance,
                     std::size_t max_per_shard) {
  config.validate();
  auto t0 = std::chrono::steady_clock::now();
  auto aligned = align(corpus, vectors, tokenizer, true);
  SemDedupStats stats;
  stats.docs_in = aligned.docs_in;
  stats.tokens_in = aligned.tokens_in;
  stats.skipped_empty = aligned.skipped_empty;
  stats.vectors = aligned.vectors.size();
  auto sel = d4_select(aligned.vectors, config);
  stats.clustering_seconds = seconds_since(t0);
  stats.vectors_kept = sel.kept_count();

  std::unordered_set<std::string> kept;
  for (std::size_t i = 0; i < aligned.vectors.size(); ++i) {
    if (sel.kept_rows[i]) kept.insert(aligned.vectors.keys[i].id);
  }

  t0 = std::chrono::steady_clock::now();
  fs::create_directories(out_dir);
  std::vector<std::string> kept_ids;
  {
    io::ShardReader reader(corpus);
    io::ShardWriter writer(out_dir, {.max_per_shard = max_per_shard}, tokenizer);
    while (auto doc = reader.next()) {
      if (!kept.count(doc->id)) continue;
      kept_ids.push_back(doc->id);
      ++stats.docs_out;
      stats.tokens_out += io::ensure_token_count(*doc, tokenizer);
      writer.write(std::move(*doc));
    }
    auto prov = corpus.manifest.provenance;
    prov.push_back(provenance);
    writer.finish(std::move(prov));
  }
  stats.removal_fraction =
      stats.docs_in == 0 ? 0.0
                         : 1.0 - static_cast<double>(stats.docs_out) /
                                     static_cast<double>(stats.docs_in);

  write_kept_ids(std::move(kept_ids), out_dir / kKeptIdsFile);
  write_cluster_map(aligned.vectors, sel.cluster_of, out_dir / kClusterMapFile);
  write_centroids(sel.model, out_dir / kCentroidsFile);
  json report = {{"stage", "d4"},
                 {"recluster_k", config.recluster_k},
                 {"r_proto", config.r_proto},
                 {"docs_in", stats.docs_in},
                 {"docs_out", stats.docs_out},
                 {"skipped_empty", stats.skipped_empty},
                 {"vectors", stats.vectors},
                 {"vectors_kept", stats.vectors_kept},
                 {"removal_fraction", stats.removal_fraction},
                 {"kmeans_iterations", sel.model.iterations_run},
                 {"inertia", sel.model.inertia},
                 {"clusters", cluster_json(sel)}};
  io::write_file_atomic(out_dir / kReportFile, report.dump(2) + "\n");
  stats.filtering_seconds = seconds_since(t0);
  return stats;
}

std::vector<std::string> read_kept_ids(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      ids.push_back(json::parse(line).get<std::string>());
    } catch (const json::exception& e) {
      throw IoError("bad kept-id line in " + file.string() + ": " + e.what());
    }
  }
  return ids;
}

}  // namespace corpusforge::semdedup
