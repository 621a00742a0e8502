#include "corpusforge/classifier/threshold.hpp"

#include <charconv>
#include <limits>

#include "corpusforge/io/shards.hpp"
#include "corpusforge/util/error.hpp"
#include "corpusforge/util/parallel.hpp"

namespace corpusforge::classifier {

namespace {

constexpr std::size_t kScoreBatch = 2048;

// Weighted selection: the largest distinct score s with
// sum(tokens | score >= s) >= need. Three-way partitions the working range
// around a median-of-three pivot and recurses into one side.
double select_threshold(std::vector<ScoredDoc>& v, std::uint64_t need) {
  std::size_t lo = 0;
  std::size_t hi = v.size();
  for (;;) {
    const double a = v[lo].score;
    const double b = v[lo + (hi - lo) / 2].score;
    const double c = v[hi - 1].score;
    const double pivot = std::max(std::min(a, b), std::min(std::max(a, b), c));

    // [lo, gt) > pivot, [gt, eq) == pivot, [eq, hi) < pivot
    std::size_t gt = lo;
    std::size_t i = lo;
    std::size_t lt = hi;
    while (i < lt) {
      if (v[i].score > pivot) {
        std::swap(v[i++], v[gt++]);
      } else if (v[i].score < pivot) {
        std::swap(v[i], v[--lt]);
      } else {
        ++i;
      }
    }
    std::uint64_t above = 0;
    for (std::size_t k = lo; k < gt; ++k) above += v[k].tokens;
    std::uint64_t equal = 0;
    for (std::size_t k = gt; k < lt; ++k) equal += v[k].tokens;

    if (gt > lo && above >= need) {
      hi = gt;
    } else if (above + equal >= need) {
      return pivot;
    } else {
      need -= above + equal;
      lo = lt;
    }
  }
}

template <class Sink>
void score_corpus(const LinearClassifier& model, const io::Corpus& corpus, unsigned workers,
                  Sink&& sink, std::uint64_t* malformed = nullptr) {
  io::ShardReader reader(corpus);
  std::vector<io::Document> batch;
  std::vector<double> scores;
  auto flush = [&] {
    scores.assign(batch.size(), 0.0);
    parallel_for(batch.size(), workers, [&](std::size_t i) {
      if (!batch[i].text.empty()) scores[i] = model.predict(batch[i].text);
    });
    for (std::size_t i = 0; i < batch.size(); ++i) sink(batch[i], scores[i]);
    batch.clear();
  };
  while (auto doc = reader.next()) {
    batch.push_back(std::move(*doc));
    if (batch.size() == kScoreBatch) flush();
  }
  flush();
  if (malformed) *malformed = reader.stats().malformed;
}

}  // namespace

ThresholdCalibration calibrate_threshold(std::vector<ScoredDoc> scores,
                                         std::uint64_t target_tokens) {
  ThresholdCalibration cal;
  cal.target_tokens = target_tokens;
  std::uint64_t total = 0;
  for (const auto& s : scores) total += s.tokens;

  if (scores.empty()) {
    cal.threshold = 1.0;
    cal.target_exceeds_corpus = target_tokens > 0;
    return cal;
  }
  if (target_tokens > total) {
    cal.threshold = 0.0;
    cal.target_exceeds_corpus = true;
  } else {
    cal.threshold = select_threshold(scores, target_tokens);
  }
  for (const auto& s : scores) {
    if (s.score >= cal.threshold) {
      cal.achieved_tokens += s.tokens;
      ++cal.achieved_docs;
    }
  }
  return cal;
}

ThresholdCalibration calibrate_threshold(const LinearClassifier& model, const io::Corpus& corpus,
                                         std::uint64_t target_tokens,
                                         const io::Tokenizer& tokenizer, unsigned workers) {
  std::vector<ScoredDoc> scores;
  scores.reserve(corpus.manifest.doc_count);
  score_corpus(model, corpus, workers, [&](io::Document& doc, double score) {
    if (doc.text.empty()) return;
    scores.push_back({score, io::ensure_token_count(doc, tokenizer)});
  });
  return calibrate_threshold(std::move(scores), target_tokens);
}

std::string format_score(double score) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), score);
  return std::string(buf, res.ptr);
}

FilterStats filter_corpus(const io::Corpus& corpus, const LinearClassifier& model,
                          double threshold, const std::filesystem::path& out_dir,
                          const io::Tokenizer& tokenizer, const io::ProvenanceEntry& provenance,
                          unsigned workers, std::size_t max_per_shard) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must be in [0, 1]");
  FilterStats stats;
  io::ShardWriter writer(out_dir, {.max_per_shard = max_per_shard}, tokenizer);
  score_corpus(
      model, corpus, workers,
      [&](io::Document& doc, double score) {
        const std::uint64_t tokens = io::ensure_token_count(doc, tokenizer);
        ++stats.docs_in;
        stats.tokens_in += tokens;
        if (doc.text.empty()) {
          ++stats.skipped_empty;
          return;
        }
        if (score < threshold) return;
        doc.meta[kScoreMetaKey] = format_score(score);
        ++stats.docs_out;
        stats.tokens_out += tokens;
        writer.write(std::move(doc));
      },
      &stats.malformed);
  auto prov = corpus.manifest.provenance;
  prov.push_back(provenance);
  writer.finish(std::move(prov));
  return stats;
}

}  // namespace corpusforge::classifier
