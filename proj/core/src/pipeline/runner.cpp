#include "corpusforge/pipeline/runner.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>

#include "corpusforge/classifier/linear_classifier.hpp"
#include "corpusforge/classifier/threshold.hpp"
#include "corpusforge/embedding/stage.hpp"
#include "corpusforge/embedding/vector_store.hpp"
#include "corpusforge/minhash/stage.hpp"
#include "corpusforge/semdedup/semdedup.hpp"
#include "corpusforge/util/error.hpp"
#include "corpusforge/util/hash.hpp"

namespace corpusforge::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

class DirLock {
 public:
  explicit DirLock(const fs::path& file) {
    fd_ = ::open(file.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError("cannot open lock file " + file.string());
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw StageError("another pipeline is running in " + file.parent_path().string());
    }
  }
  ~DirLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  int fd_ = -1;
};

double hours(double seconds) { return seconds / 3600.0; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string group_of(StageKind kind) {
  switch (kind) {
    case StageKind::Embed:
    case StageKind::SemDedup: return "semdedup";
    default: return stage_name(kind);
  }
}

bool produces_corpus(StageKind kind) { return kind != StageKind::Embed; }

json reports_json(const std::vector<StageReport>& reports) {
  json arr = json::array();
  for (const auto& r : reports) arr.push_back(report_to_json(r));
  return arr;
}

std::vector<StageReport> reports_from(const json& arr) {
  std::vector<StageReport> out;
  for (const auto& j : arr) out.push_back(report_from_json(j));
  return out;
}

std::optional<json> read_json(const fs::path& file) {
  if (!fs::exists(file)) return std::nullopt;
  try {
    return json::parse(io::read_file(file));
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

// One resumable unit of work inside a stage: if its record exists the step
// already completed and its reports (plus any extra values) are reused.
struct StepResult {
  std::vector<StageReport> reports;
  json extra = json::object();
};

template <class Fn>
StepResult run_step(const fs::path& dir, const std::string& name, Fn&& fn) {
  const fs::path record = dir / (name + ".step.json");
  if (auto j = read_json(record)) {
    return {reports_from(j->at("reports")), j->value("extra", json::object())};
  }
  StepResult r = fn();
  io::write_file_atomic(record, json{{"reports", reports_json(r.reports)}, {"extra", r.extra}}.dump(2) + "\n");
  return r;
}

struct StageContext {
  const PipelineConfig& cfg;
  const StageConfig& stage;
  const io::Tokenizer& tokenizer;
  const io::Corpus& corpus;
  fs::path dir;
  io::ProvenanceEntry provenance;
  fs::path vectors;  // embed output, when one exists
  std::size_t max_tokens = embedding::kDefaultChunkTokens;
};

StageReport make_report(const StageContext& c, const std::string& step, std::uint64_t docs_in,
                        std::uint64_t docs_out, std::uint64_t tokens_in, std::uint64_t tokens_out,
                        double seconds) {
  StageReport r;
  r.stage = stage_name(c.stage.kind);
  r.step = step;
  r.group = group_of(c.stage.kind);
  r.docs_in = docs_in;
  r.docs_out = docs_out;
  r.tokens_in = tokens_in;
  r.tokens_out = tokens_out;
  r.wall_hours = hours(seconds);
  return r;
}

// Report for a step that reads the whole corpus but does not change it.
StageReport pass_report(const StageContext& c, const std::string& step, double seconds) {
  const auto& m = c.corpus.manifest;
  return make_report(c, step, m.doc_count, m.doc_count, m.token_count, m.token_count, seconds);
}

std::vector<StageReport> run_filter(const StageContext& c) {
  const auto& p = c.stage.filter;
  auto model = classifier::LinearClassifier::load(p.model);
  std::vector<StageReport> out;
  double threshold = p.threshold.value_or(0.0);
  if (p.target_tokens) {
    auto s = run_step(c.dir, "scoring", [&] {
      const auto t0 = std::chrono::steady_clock::now();
      auto cal = classifier::calibrate_threshold(model, c.corpus, *p.target_tokens, c.tokenizer,
                                                 c.cfg.workers);
      StepResult r{{pass_report(c, "scoring", seconds_since(t0))}};
      r.extra = {{"threshold", cal.threshold},
                 {"achieved_tokens", cal.achieved_tokens},
                 {"target_exceeds_corpus", cal.target_exceeds_corpus}};
      return r;
    });
    threshold = s.extra.at("threshold").get<double>();
    out.insert(out.end(), s.reports.begin(), s.reports.end());
  }
  auto f = run_step(c.dir, "filtering", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    auto st = classifier::filter_corpus(c.corpus, model, threshold, c.dir, c.tokenizer,
                                        c.provenance, c.cfg.workers, c.cfg.max_per_shard);
    return StepResult{{make_report(c, "filtering", st.docs_in, st.docs_out, st.tokens_in,
                                   st.tokens_out, seconds_since(t0))}};
  });
  out.insert(out.end(), f.reports.begin(), f.reports.end());
  return out;
}

std::vector<StageReport> run_minhash(const StageContext& c) {
  const fs::path sig = c.dir / "signatures.bin";
  const fs::path pairs = c.dir / "pairs.bin";
  const fs::path clusters = c.dir / "clusters.bin";
  std::vector<StageReport> out;
  auto add = [&](const StepResult& r) { out.insert(out.end(), r.reports.begin(), r.reports.end()); };

  add(run_step(c.dir, "signatures", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    minhash::sign_corpus(c.corpus, c.stage.minhash, sig, c.cfg.workers);
    return StepResult{{pass_report(c, "signatures", seconds_since(t0))}};
  }));
  add(run_step(c.dir, "buckets", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path work = c.dir / "work";
    fs::remove_all(work);
    auto st = minhash::bucket_signatures(sig, pairs, work);
    fs::remove_all(work);
    StepResult r{{pass_report(c, "buckets", seconds_since(t0))}};
    r.extra = {{"candidate_pairs", st.candidate_pairs}, {"sorted_runs", st.sorted_runs}};
    return r;
  }));
  add(run_step(c.dir, "clusters", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    minhash::cluster_signatures(sig, pairs, clusters);
    return StepResult{{pass_report(c, "clusters", seconds_since(t0))}};
  }));
  add(run_step(c.dir, "filtering", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    auto st = minhash::filter_duplicates(minhash::read_clusters(clusters), c.corpus, c.dir,
                                         c.tokenizer, c.provenance, c.cfg.max_per_shard);
    return StepResult{{make_report(c, "filtering", st.docs_in, st.docs_out, st.tokens_in,
                                   st.tokens_out, seconds_since(t0))}};
  }));
  return out;
}

std::vector<StageReport> run_embed(const StageContext& c) {
  return run_step(c.dir, "embedding", [&] {
           auto embedder = embedding::make_embedder(c.stage.embed.embedder);
           auto opts = c.stage.embed.options;
           opts.workers = c.cfg.workers;
           auto st = embedding::embed_corpus(c.corpus, *embedder, c.tokenizer, c.dir, opts);
           return StepResult{{pass_report(c, "tokenizer", st.chunking_seconds),
                              pass_report(c, "embeddings", st.embedding_seconds)}};
         })
      .reports;
}

std::vector<StageReport> run_semdedup_stage(const StageContext& c) {
  return run_step(c.dir, "semdedup", [&] {
           const auto vectors = embedding::read_vectors(c.vectors);
           auto cfg = c.stage.semdedup;
           cfg.workers = c.cfg.workers;
           auto st = semdedup::run_semdedup(c.corpus, vectors, cfg, c.dir, c.tokenizer,
                                            c.provenance, c.max_tokens, c.cfg.max_per_shard);
           return StepResult{
               {pass_report(c, "clustering", st.clustering_seconds),
                pass_report(c, "deduplication", st.dedup_seconds),
                make_report(c, "filtering", st.docs_in, st.docs_out, st.tokens_in, st.tokens_out,
                            st.filtering_seconds)}};
         })
      .reports;
}

std::vector<StageReport> run_d4_stage(const StageContext& c) {
  return run_step(c.dir, "d4", [&] {
           const auto vectors = embedding::read_vectors(c.vectors);
           auto cfg = c.stage.d4;
           cfg.workers = c.cfg.workers;
           auto st = semdedup::run_d4(c.corpus, vectors, cfg, c.dir, c.tokenizer, c.provenance,
                                      c.cfg.max_per_shard);
           return StepResult{{pass_report(c, "clustering", st.clustering_seconds),
                              make_report(c, "filtering", st.docs_in, st.docs_out, st.tokens_in,
                                          st.tokens_out, st.filtering_seconds)}};
         })
      .reports;
}

void apply_devices(const PipelineConfig& cfg, const StageConfig& st,
                   std::vector<StageReport>& reports) {
  for (auto& r : reports) r.set_device(cfg.device_for(st, r.step));
}

// Final manifest with shard paths relative to the output directory.
io::CorpusManifest relocate(const io::Corpus& corpus, const fs::path& output) {
  io::CorpusManifest m = corpus.manifest;
  const auto paths = corpus.shard_paths();
  const auto base = fs::weakly_canonical(output);
  for (std::size_t i = 0; i < m.shards.size(); ++i) {
    auto rel = fs::weakly_canonical(paths[i]).lexically_relative(base);
    m.shards[i].path = rel.empty() ? fs::absolute(paths[i]).string() : rel.generic_string();
  }
  return m;
}

}  // namespace

fs::path stage_dir(const PipelineConfig& cfg, std::size_t index) {
  char name[64];
  std::snprintf(name, sizeof name, "%02zu-%s", index + 1,
                stage_name(cfg.stages.at(index).kind).c_str());
  return cfg.output / name;
}

RunResult run_pipeline(const PipelineConfig& cfg, const RunOptions& options) {
  cfg.validate();
  std::unique_ptr<io::Tokenizer> tokenizer;
  io::Corpus input;
  std::vector<std::uint64_t> stage_hashes;
  try {
    tokenizer = io::make_tokenizer(cfg.tokenizer);
    input = io::load_corpus(cfg.input);
    for (const auto& st : cfg.stages) stage_hashes.push_back(stage_config_hash(cfg, st));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("pre-flight: ") + e.what());
  }
  if (!options.halt_after.empty()) parse_stage_kind(options.halt_after);

  fs::create_directories(cfg.output);
  DirLock lock(cfg.output / kLockFile);

  RunResult result;
  io::Corpus corpus = input;
  std::uint64_t chain = fnv1a64(io::manifest_to_json(input.manifest));
  fs::path vectors;
  std::size_t max_tokens = embedding::kDefaultChunkTokens;
  std::vector<io::ProvenanceEntry> pending;  // from stages that emit no corpus

  for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
    const auto& st = cfg.stages[i];
    const std::string name = stage_name(st.kind);
    chain = mix64(fnv1a64_extend_u64(chain, stage_hashes[i]));
    const std::string chain_hex = hex64(chain);
    const fs::path dir = stage_dir(cfg, i);
    const io::ProvenanceEntry prov{name, chain_hex};

    std::vector<StageReport> reports;
    auto marker = read_json(dir / kMarkerFile);
    if (marker && marker->value("chain", "") == chain_hex) {
      reports = reports_from(marker->at("reports"));
      result.skipped.push_back(name);
    } else {
      // A different chain means this stage (and so everything after it)
      // was produced from other inputs or settings.
      const auto started = read_json(dir / kStageHashFile);
      if (!started || started->value("chain", "") != chain_hex) fs::remove_all(dir);
      fs::create_directories(dir);
      io::write_file_atomic(dir / kStageHashFile, json{{"chain", chain_hex}}.dump() + "\n");

      io::Corpus in = corpus;
      if (produces_corpus(st.kind)) {
        for (const auto& p : pending) in.manifest.provenance.push_back(p);
      }
      StageContext ctx{cfg, st, *tokenizer, in, dir, prov, vectors, max_tokens};
      try {
        switch (st.kind) {
          case StageKind::Filter: reports = run_filter(ctx); break;
          case StageKind::MinHash: reports = run_minhash(ctx); break;
          case StageKind::Embed: reports = run_embed(ctx); break;
          case StageKind::SemDedup: reports = run_semdedup_stage(ctx); break;
          case StageKind::D4: reports = run_d4_stage(ctx); break;
        }
      } catch (const ConfigError& e) {
        throw StageError("stage " + name + ": " + e.what());
      } catch (const Error& e) {
        throw StageError("stage " + name + ": " + e.what());
      }
      json m{{"stage", name},
             {"chain", chain_hex},
             {"config_hash", hex64(stage_hashes[i])},
             {"config", json::parse(canonical_stage_config(cfg, st))},
             {"reports", reports_json(reports)}};
      io::write_file_atomic(dir / kMarkerFile, m.dump(2) + "\n");
      result.executed.push_back(name);
    }
    apply_devices(cfg, st, reports);
    result.reports.insert(result.reports.end(), reports.begin(), reports.end());

    if (produces_corpus(st.kind)) {
      corpus = io::load_corpus(dir);
      pending.clear();
    } else {
      pending.push_back(prov);
      vectors = dir / embedding::kVectorsFile;
      max_tokens = st.embed.options.max_tokens;
    }

    if (options.after_stage) options.after_stage(name);
    if (options.halt_after == name) {
      result.halted = true;
      break;
    }
  }

  for (const auto& p : pending) corpus.manifest.provenance.push_back(p);
  result.final_manifest = relocate(corpus, cfg.output);
  io::write_file_atomic(cfg.output / kReportsFile,
                        json{{"reports", reports_json(result.reports)},
                             {"complete", !result.halted}}
                                .dump(2) +
                            "\n");
  if (result.halted) {
    fs::remove(cfg.output / io::kManifestFile);
  } else {
    io::save_manifest(result.final_manifest, cfg.output / io::kManifestFile);
  }
  return result;
}

std::vector<StageReport> load_reports(const fs::path& output_dir) {
  const fs::path file = output_dir / kReportsFile;
  auto j = read_json(file);
  if (!j) throw IoError("no readable " + file.string());
  return reports_from(j->at("reports"));
}

}  // namespace corpusforge::pipeline
