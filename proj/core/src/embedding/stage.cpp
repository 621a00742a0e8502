#include "corpusforge/embedding/stage.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "corpusforge/io/shards.hpp"
#include "corpusforge/util/error.hpp"
#include "corpusforge/util/parallel.hpp"

namespace corpusforge::embedding {

namespace fs = std::filesystem;

namespace {

struct Progress {
  std::uint64_t docs = 0;
  std::uint64_t rows = 0;
  std::uint64_t skipped = 0;
  std::uint64_t chunks = 0;
};

// Last complete "commit <docs> <rows> <skipped> <chunks>" line, if any.
std::optional<Progress> read_progress(const fs::path& file) {
  std::ifstream in(file);
  if (!in) return std::nullopt;
  std::optional<Progress> last;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tag;
    Progress p;
    if (ss >> tag >> p.docs >> p.rows >> p.skipped >> p.chunks && tag == "commit") last = p;
  }
  return last;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

}  // namespace

EmbedStats embed_corpus(const io::Corpus& corpus, Embedder& embedder,
                        const io::Tokenizer& tokenizer, const fs::path& out_dir,
                        const EmbedStageOptions& options) {
  fs::create_directories(out_dir);
  const fs::path vectors_path = out_dir / kVectorsFile;
  const fs::path progress_path = out_dir / kProgressFile;

  const auto resume = read_progress(progress_path);
  EmbedStats stats;
  const std::size_t dim = embedder.dim();
  VectorWriter writer(vectors_path, dim,
                      resume ? std::optional<std::uint64_t>(resume->rows) : std::nullopt);
  std::ofstream progress(progress_path, resume ? std::ios::app : std::ios::trunc);
  if (!progress) throw IoError("cannot open " + progress_path.string());

  std::uint64_t skip_docs = 0;
  if (resume) {
    skip_docs = resume->docs;
    stats.resumed_docs = resume->docs;
    stats.docs = resume->docs;
    stats.vectors = resume->rows;
    stats.skipped_empty = resume->skipped;
    stats.chunks = resume->chunks;
  }

  io::ShardReader reader(corpus);
  std::vector<io::Document> batch;
  std::vector<std::vector<Chunk>> doc_chunks;

  auto flush = [&] {
    if (batch.empty()) return;
    auto t0 = std::chrono::steady_clock::now();
    doc_chunks.assign(batch.size(), {});
    parallel_for(batch.size(), options.workers, [&](std::size_t i) {
      doc_chunks[i] = chunk_document(batch[i], tokenizer, options.max_tokens);
    }, 8);
    std::vector<Chunk> flat;
    for (auto& c : doc_chunks) flat.insert(flat.end(), c.begin(), c.end());
    stats.chunking_seconds += seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    auto vectors = embed_chunks(flat, embedder, options.request_batch);
    stats.embedding_seconds += seconds_since(t0);

    std::size_t at = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto n = doc_chunks[i].size();
      ++stats.docs;
      if (n == 0) {
        ++stats.skipped_empty;
        continue;
      }
      stats.chunks += n;
      if (options.level == Level::Chunk) {
        for (std::size_t k = 0; k < n; ++k) {
          writer.append({vectors[at + k].id, batch[i].id, k}, vectors[at + k].values);
          ++stats.vectors;
        }
      } else {
        std::vector<std::vector<float>> values;
        values.reserve(n);
        for (std::size_t k = 0; k < n; ++k) values.push_back(std::move(vectors[at + k].values));
        writer.append({batch[i].id, batch[i].id, std::nullopt}, mean_pool(values));
        ++stats.vectors;
      }
      at += n;
    }
    writer.commit();
    progress << "commit " << stats.docs << ' ' << stats.vectors << ' ' << stats.skipped_empty
             << ' ' << stats.chunks << '\n';
    progress.flush();
    if (!progress) throw IoError("failed writing " + progress_path.string());
    batch.clear();
  };

  std::uint64_t seen = 0;
  while (auto doc = reader.next()) {
    if (seen++ < skip_docs) continue;
    batch.push_back(std::move(*doc));
    if (batch.size() >= options.docs_per_batch) flush();
  }
  flush();
  writer.commit();
  return stats;
}

}  // namespace corpusforge::embedding
