// corpusforge command line: the pipeline runner plus one subcommand per stage.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "corpusforge/classifier/linear_classifier.hpp"
#include "corpusforge/classifier/threshold.hpp"
#include "corpusforge/classifier/training_set.hpp"
#include "corpusforge/embedding/stage.hpp"
#include "corpusforge/energy/energy.hpp"
#include "corpusforge/io/shards.hpp"
#include "corpusforge/minhash/stage.hpp"
#include "corpusforge/pipeline/runner.hpp"
#include "corpusforge/semdedup/semdedup.hpp"
#include "corpusforge/util/error.hpp"
#include "corpusforge/util/hash.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace corpusforge;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

struct Common {
  std::string tokenizer = "whitespace";
  std::string vocab;
  unsigned workers = 1;
  std::size_t max_per_shard = 100000;

  std::unique_ptr<io::Tokenizer> make() const {
    return io::make_tokenizer({tokenizer, vocab});
  }
};

void add_tokenizer(CLI::App* app, Common& c) {
  app->add_option("--tokenizer", c.tokenizer, "whitespace or wordpiece")
      ->check(CLI::IsMember({"whitespace", "wordpiece"}));
  app->add_option("--vocab", c.vocab, "WordPiece vocabulary file");
}

void add_workers(CLI::App* app, Common& c) {
  app->add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
  app->add_option("--max-per-shard", c.max_per_shard, "documents per output shard")
      ->check(CLI::PositiveNumber);
}

// Standalone subcommands record their arguments' hash as provenance.
io::ProvenanceEntry provenance(const std::string& stage, const json& args) {
  return {stage, hex64(fnv1a64(args.dump()))};
}

embedding::Level parse_level(const std::string& s) {
  return s == "chunk" ? embedding::Level::Chunk : embedding::Level::Document;
}

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"corpusforge: corpus filtering and deduplication"};
  app.require_subcommand(1);
  Common common;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "pack raw JSONL or text files into a corpus");
  std::vector<std::string> ingest_inputs;
  std::string ingest_out, ingest_format = "jsonl", ingest_prefix = "doc";
  bool ingest_gzip = false;
  ingest->add_option("inputs", ingest_inputs, "input files (.gz accepted)")->required();
  ingest->add_option("--out", ingest_out, "output corpus directory")->required();
  ingest->add_option("--format", ingest_format, "jsonl (records) or text (one doc per line)")
      ->check(CLI::IsMember({"jsonl", "text"}));
  ingest->add_option("--id-prefix", ingest_prefix, "id prefix for text input");
  ingest->add_flag("--gzip", ingest_gzip, "write gzip shards");
  add_tokenizer(ingest, common);
  add_workers(ingest, common);

  // run
  auto* run = app.add_subcommand("run", "run a configured pipeline (resumable)");
  std::string run_config, run_halt;
  run->add_option("--config", run_config, "pipeline config (JSON)")->required();
  run->add_option("--halt-after", run_halt, "stop after this stage");

  // report
  auto* report = app.add_subcommand("report", "summarize a pipeline run");
  std::string report_run = ".", report_out;
  report->add_option("--run", report_run, "pipeline output directory");
  report->add_option("--out", report_out, "write summary JSON here");

  // train-classifier
  auto* train = app.add_subcommand("train-classifier", "train the domain classifier");
  std::string train_pos, train_neg, train_out;
  std::uint64_t train_ratio = 10, train_seed = 0;
  classifier::TrainOptions topt;
  train->add_option("--positives", train_pos, "in-domain corpus")->required();
  train->add_option("--negatives", train_neg, "negative pool corpus")->required();
  train->add_option("--out", train_out, "model file")->required();
  train->add_option("--ratio", train_ratio, "negatives per positive");
  train->add_option("--seed", train_seed, "sampling and training seed");
  train->add_option("--dim", topt.dim, "embedding dimension");
  train->add_option("--epochs", topt.epochs, "epochs");
  train->add_option("--lr", topt.learning_rate, "initial learning rate");
  train->add_option("--buckets", topt.featurizer.buckets, "hash buckets");

  // filter
  auto* filter = app.add_subcommand("filter", "keep documents the classifier scores highly");
  std::string filter_model, filter_in, filter_out;
  double filter_threshold = 0.5;
  std::uint64_t filter_target = 0;
  filter->add_option("--model", filter_model, "classifier model")->required();
  filter->add_option("--input", filter_in, "input corpus")->required();
  filter->add_option("--out", filter_out, "output corpus directory")->required();
  auto* thr = filter->add_option("--threshold", filter_threshold, "score threshold");
  auto* tgt = filter->add_option("--target-tokens", filter_target, "calibrate to a token budget");
  thr->excludes(tgt);
  add_tokenizer(filter, common);
  add_workers(filter, common);

  // minhash
  auto* mh = app.add_subcommand("minhash", "MinHash deduplication steps");
  mh->require_subcommand(1);
  minhash::MinHashParams mparams;
  std::string mh_in, mh_sig, mh_pairs, mh_clusters, mh_out, mh_work;
  auto* mh_sign = mh->add_subcommand("sign", "compute signatures");
  mh_sign->add_option("--input", mh_in, "input corpus")->required();
  mh_sign->add_option("--out", mh_sig, "signature file")->required();
  mh_sign->add_option("--bands", mparams.bands, "bands");
  mh_sign->add_option("--rows", mparams.rows_per_band, "rows per band");
  mh_sign->add_option("--shingle", mparams.shingle_size, "shingle size in words");
  mh_sign->add_option("--seed", mparams.hash_seed, "hash seed");
  add_workers(mh_sign, common);
  auto* mh_bucket = mh->add_subcommand("bucket", "band signatures into candidate pairs");
  mh_bucket->add_option("--signatures", mh_sig, "signature file")->required();
  mh_bucket->add_option("--out", mh_pairs, "pair file")->required();
  mh_bucket->add_option("--work-dir", mh_work, "scratch directory for sorted runs");
  auto* mh_cluster = mh->add_subcommand("cluster", "union candidate pairs into clusters");
  mh_cluster->add_option("--signatures", mh_sig, "signature file")->required();
  mh_cluster->add_option("--pairs", mh_pairs, "pair file")->required();
  mh_cluster->add_option("--out", mh_clusters, "cluster file")->required();
  auto* mh_filter = mh->add_subcommand("filter", "keep one document per cluster");
  mh_filter->add_option("--clusters", mh_clusters, "cluster file")->required();
  mh_filter->add_option("--input", mh_in, "input corpus")->required();
  mh_filter->add_option("--out", mh_out, "output corpus directory")->required();
  add_tokenizer(mh_filter, common);
  add_workers(mh_filter, common);

  // embed
  auto* embed = app.add_subcommand("embed", "embed documents or chunks");
  std::string embed_in, embed_out, embed_kind = "hashing", embed_level = "doc";
  embedding::EmbedderSpec espec;
  embedding::EmbedStageOptions eopt;
  embed->add_option("--input", embed_in, "input corpus")->required();
  embed->add_option("--out", embed_out, "output directory")->required();
  embed->add_option("--embedder", embed_kind, "hashing or remote")
      ->check(CLI::IsMember({"hashing", "remote"}));
  embed->add_option("--endpoint", espec.endpoint, "embedding service base URL");
  embed->add_option("--dim", espec.dim, "embedding dimension (0: take the service's)");
  embed->add_option("--seed", espec.hash_seed, "hashing embedder seed");
  embed->add_option("--batch-size", espec.batch_size, "texts per request");
  embed->add_option("--max-in-flight", espec.max_in_flight, "concurrent requests");
  embed->add_option("--level", embed_level, "doc or chunk")->check(CLI::IsMember({"doc", "chunk"}));
  embed->add_option("--max-tokens", eopt.max_tokens, "tokens per chunk");
  add_tokenizer(embed, common);
  add_workers(embed, common);

  // semdedup
  auto* sem = app.add_subcommand("semdedup", "semantic deduplication");
  std::string sem_in, sem_vectors, sem_out, sem_level = "doc", sem_keep = "farthest",
                                           sem_mode = "distance";
  semdedup::SemDedupConfig scfg;
  std::size_t sem_max_tokens = embedding::kDefaultChunkTokens;
  sem->add_option("--input", sem_in, "input corpus")->required();
  sem->add_option("--vectors", sem_vectors, "vector file from embed")->required();
  sem->add_option("--out", sem_out, "output directory")->required();
  sem->add_option("--clusters", scfg.n_clusters, "number of K-means clusters");
  sem->add_option("--tau", scfg.tau, "cosine distance threshold");
  sem->add_option("--level", sem_level, "doc or chunk")->check(CLI::IsMember({"doc", "chunk"}));
  sem->add_option("--keep", sem_keep, "farthest or smallest-id")
      ->check(CLI::IsMember({"farthest", "smallest-id"}));
  sem->add_option("--threshold-mode", sem_mode, "distance or similarity")
      ->check(CLI::IsMember({"distance", "similarity"}));
  sem->add_option("--seed", scfg.seed, "K-means seed");
  sem->add_option("--max-cluster-size", scfg.max_cluster_size, "split larger clusters");
  sem->add_flag("--chunk-output", scfg.chunk_corpus_output, "emit surviving chunks as documents");
  sem->add_option("--max-tokens", sem_max_tokens, "tokens per chunk (used with --chunk-output)");
  add_tokenizer(sem, common);
  add_workers(sem, common);

  // d4
  auto* d4 = app.add_subcommand("d4", "recluster and keep points far from centroids");
  std::string d4_in, d4_vectors, d4_out;
  semdedup::D4Config dcfg;
  d4->add_option("--input", d4_in, "semdedup output corpus")->required();
  d4->add_option("--vectors", d4_vectors, "document-level vector file")->required();
  d4->add_option("--out", d4_out, "output directory")->required();
  d4->add_option("--rproto", dcfg.r_proto, "retention ratio per cluster");
  d4->add_option("--clusters", dcfg.recluster_k, "number of K-means clusters");
  d4->add_option("--seed", dcfg.seed, "K-means seed");
  add_tokenizer(d4, common);
  add_workers(d4, common);

  // energy
  auto* en = app.add_subcommand("energy", "energy accounting from a stage inventory");
  std::string en_file, en_out;
  en->add_option("--inventory", en_file, "JSON inventory of devices, stages, training run")
      ->required();
  en->add_option("--out", en_out, "write JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*ingest) {
      auto tok = common.make();
      io::ShardWriter writer(ingest_out, {.max_per_shard = common.max_per_shard,
                                          .compress = ingest_gzip},
                             *tok);
      std::uint64_t malformed = 0, line_no = 0;
      for (const auto& in : ingest_inputs) {
        io::LineReader reader(in);
        std::string line;
        while (reader.getline(line)) {
          if (ingest_format == "text") {
            if (line.empty()) continue;
            writer.write({ingest_prefix + "-" + std::to_string(line_no++), line, {}, std::nullopt});
            continue;
          }
          if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
          if (auto doc = io::parse_record(line)) {
            doc->token_count.reset();
            writer.write(std::move(*doc));
          } else {
            ++malformed;
          }
        }
      }
      auto m = writer.finish({provenance("ingest", {{"format", ingest_format}})});
      print_json({{"docs", m.doc_count}, {"tokens", m.token_count}, {"malformed", malformed},
                  {"shards", m.shards.size()}});
    } else if (*run) {
      auto cfg = pipeline::load_config(run_config);
      pipeline::RunOptions opts;
      opts.halt_after = run_halt;
      auto result = pipeline::run_pipeline(cfg, opts);
      for (const auto& s : result.skipped) std::cerr << "reused  " << s << '\n';
      for (const auto& s : result.executed) std::cerr << "ran     " << s << '\n';
      const auto summary = pipeline::report_stats(result.reports);
      std::cout << pipeline::summary_to_text(summary, result.reports);
      if (result.halted) std::cerr << "halted after " << run_halt << '\n';
    } else if (*report) {
      const auto reports = pipeline::load_reports(report_run);
      const auto summary = pipeline::report_stats(reports);
      std::cout << pipeline::summary_to_text(summary, reports);
      if (!report_out.empty()) {
        io::write_file_atomic(report_out, pipeline::summary_to_json(summary, reports).dump(2) + "\n");
      }
    } else if (*train) {
      const auto positives = io::load_corpus(train_pos);
      const auto negatives = io::load_corpus(train_neg);
      io::ShardReader pos_reader(positives);
      io::ShardReader neg_reader(negatives);
      auto examples =
          classifier::build_training_set(io::read_all(pos_reader), neg_reader, train_ratio, train_seed);
      topt.seed = train_seed;
      auto result = classifier::train(examples, topt);
      result.model.save(train_out);
      print_json({{"examples", examples.size()},
                  {"train_accuracy", result.train_accuracy},
                  {"skipped_empty", result.skipped_empty}});
    } else if (*filter) {
      auto tok = common.make();
      const auto model = classifier::LinearClassifier::load(filter_model);
      const auto corpus = io::load_corpus(filter_in);
      double threshold = filter_threshold;
      json out;
      if (*tgt) {
        auto cal = classifier::calibrate_threshold(model, corpus, filter_target, *tok, common.workers);
        threshold = cal.threshold;
        out["achieved_tokens"] = cal.achieved_tokens;
        out["target_exceeds_corpus"] = cal.target_exceeds_corpus;
      }
      auto st = classifier::filter_corpus(
          corpus, model, threshold, filter_out, *tok,
          provenance("filter", {{"model", hex64(fnv1a64(io::read_file(filter_model)))},
                                {"threshold", threshold}}),
          common.workers, common.max_per_shard);
      out["threshold"] = threshold;
      out["docs_in"] = st.docs_in;
      out["docs_out"] = st.docs_out;
      out["tokens_out"] = st.tokens_out;
      out["skipped_empty"] = st.skipped_empty;
      print_json(out);
    } else if (*mh_sign) {
      auto st = minhash::sign_corpus(io::load_corpus(mh_in), mparams, mh_sig, common.workers);
      print_json({{"docs", st.docs}, {"malformed", st.malformed}});
    } else if (*mh_bucket) {
      const fs::path work = mh_work.empty() ? fs::path(mh_pairs + ".runs") : fs::path(mh_work);
      auto st = minhash::bucket_signatures(mh_sig, mh_pairs, work);
      fs::remove_all(work);
      print_json({{"band_records", st.band_records},
                  {"sorted_runs", st.sorted_runs},
                  {"candidate_pairs", st.candidate_pairs}});
    } else if (*mh_cluster) {
      auto c = minhash::cluster_signatures(mh_sig, mh_pairs, mh_clusters);
      print_json({{"docs", c.ids.size()}, {"clusters", c.num_clusters()}});
    } else if (*mh_filter) {
      auto tok = common.make();
      auto st = minhash::filter_duplicates(
          minhash::read_clusters(mh_clusters), io::load_corpus(mh_in), mh_out, *tok,
          provenance("minhash", {{"clusters", hex64(fnv1a64(io::read_file(mh_clusters)))}}),
          common.max_per_shard);
      print_json({{"docs_in", st.docs_in}, {"docs_out", st.docs_out}, {"removed", st.removed}});
    } else if (*embed) {
      auto tok = common.make();
      espec.kind = embed_kind == "remote" ? embedding::EmbedderSpec::Kind::RemoteService
                                          : embedding::EmbedderSpec::Kind::DeterministicTest;
      if (espec.kind == embedding::EmbedderSpec::Kind::RemoteService && espec.endpoint.empty()) {
        throw ConfigError("--embedder remote needs --endpoint");
      }
      eopt.level = parse_level(embed_level);
      eopt.request_batch = espec.batch_size;
      eopt.workers = common.workers;
      auto embedder = embedding::make_embedder(espec);
      auto st = embedding::embed_corpus(io::load_corpus(embed_in), *embedder, *tok, embed_out, eopt);
      print_json({{"docs", st.docs},
                  {"chunks", st.chunks},
                  {"vectors", st.vectors},
                  {"skipped_empty", st.skipped_empty},
                  {"resumed_docs", st.resumed_docs},
                  {"vectors_file", (fs::path(embed_out) / embedding::kVectorsFile).string()}});
    } else if (*sem) {
      auto tok = common.make();
      scfg.level = parse_level(sem_level);
      scfg.keep = sem_keep == "farthest" ? semdedup::KeepPolicy::FarthestFromCentroid
                                         : semdedup::KeepPolicy::SmallestId;
      scfg.mode = sem_mode == "distance" ? semdedup::ThresholdMode::CosineDistance
                                         : semdedup::ThresholdMode::CosineSimilarity;
      scfg.workers = common.workers;
      const json args = {{"clusters", scfg.n_clusters}, {"tau", scfg.tau}, {"level", sem_level},
                         {"keep", sem_keep}, {"mode", sem_mode}, {"seed", scfg.seed}};
      auto st = semdedup::run_semdedup(io::load_corpus(sem_in), embedding::read_vectors(sem_vectors),
                                       scfg, sem_out, *tok, provenance("semdedup", args),
                                       sem_max_tokens, common.max_per_shard);
      print_json({{"docs_in", st.docs_in},
                  {"docs_out", st.docs_out},
                  {"vectors", st.vectors},
                  {"vectors_kept", st.vectors_kept},
                  {"removal_fraction", st.removal_fraction}});
    } else if (*d4) {
      auto tok = common.make();
      dcfg.workers = common.workers;
      const json args = {{"clusters", dcfg.recluster_k}, {"r_proto", dcfg.r_proto},
                         {"seed", dcfg.seed}};
      auto st = semdedup::run_d4(io::load_corpus(d4_in), embedding::read_vectors(d4_vectors), dcfg,
                                 d4_out, *tok, provenance("d4", args), common.max_per_shard);
      print_json({{"docs_in", st.docs_in},
                  {"docs_out", st.docs_out},
                  {"removal_fraction", st.removal_fraction}});
    } else if (*en) {
      const std::string text = io::read_file(en_file);
      const auto stages = energy::stage_costs_from_json(text);
      const auto summary = energy::summarize(stages);
      std::cout << energy::format_summary(stages, summary);
      json out = {{"total_wh", summary.total_wh}};
      for (const auto& g : summary.groups) out["groups"][g.group] = g.wh;

      // Optional training comparison: {"training": {"total_steps", "full_wh"
      // or "wall_hours", "tdp_watts", "count", "equivalent_step"}}.
      const json inv = json::parse(text);
      if (inv.contains("training")) {
        const auto& t = inv["training"];
        energy::TrainingRunSpec run;
        run.total_steps = t.at("total_steps").get<std::int64_t>();
        run.devices = {t.value("device", "gpu"), t.at("tdp_watts").get<double>(),
                       t.value("count", std::int64_t{1})};
        run.wall_hours = t.contains("full_wh")
                             ? energy::wall_hours_for_energy(t["full_wh"].get<double>(), run.devices)
                             : t.at("wall_hours").get<double>();
        const double full = energy::training_energy_at_step(run, run.total_steps);
        const double equiv =
            energy::training_energy_at_step(run, t.at("equivalent_step").get<std::int64_t>());
        const double gain = energy::net_gain_percent(full, equiv, summary.total_wh);
        std::printf("training: full %.1f Wh, equivalent %.1f Wh, net gain %.2f%%\n", full, equiv,
                    gain);
        out["training"] = {{"wall_hours", run.wall_hours},
                           {"full_wh", full},
                           {"equivalent_wh", equiv},
                           {"net_gain_percent", gain},
                           {"gain_without_overhead_percent", energy::net_gain_percent(full, equiv, 0)}};
      }
      if (!en_out.empty()) io::write_file_atomic(en_out, out.dump(2) + "\n");
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitStage;
  }
  return 0;
}
