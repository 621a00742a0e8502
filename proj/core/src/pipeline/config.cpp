#include "corpusforge/pipeline/config.hpp"

#include <set>

#include "corpusforge/io/manifest.hpp"
#include "corpusforge/util/error.hpp"
#include "corpusforge/util/hash.hpp"

namespace corpusforge::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": bad value for '" + key + "'");
  }
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

std::uint64_t stage_seed(const json& block, std::uint64_t global, StageKind kind,
                         const std::string& where) {
  if (block.contains("seed")) return get_or<std::uint64_t>(block, "seed", 0, where);
  return mix64(global ^ fnv1a64(stage_name(kind)));
}

embedding::Level parse_level(const std::string& s, const std::string& where) {
  if (s == "doc" || s == "document") return embedding::Level::Document;
  if (s == "chunk") return embedding::Level::Chunk;
  throw ConfigError(where + ": level must be doc or chunk");
}

const char* level_name(embedding::Level l) {
  return l == embedding::Level::Document ? "doc" : "chunk";
}

DeviceUse parse_device_use(const json& j, const std::string& where) {
  DeviceUse d;
  d.device = get_or<std::string>(j, "device", "cpu", where);
  d.count = get_or<std::int64_t>(j, "count", 1, where);
  return d;
}

void parse_embedder(const json& j, std::uint64_t seed, embedding::EmbedderSpec& spec) {
  const std::string where = "embed.embedder";
  check_keys(j, {"kind", "dim", "seed", "endpoint", "batch_size", "max_in_flight", "max_retries",
                 "initial_backoff_ms", "timeout_seconds"},
             where);
  const auto kind = get_or<std::string>(j, "kind", "hashing", where);
  if (kind == "hashing") {
    spec.kind = embedding::EmbedderSpec::Kind::DeterministicTest;
  } else if (kind == "remote") {
    spec.kind = embedding::EmbedderSpec::Kind::RemoteService;
  } else {
    throw ConfigError(where + ": kind must be hashing or remote");
  }
  spec.dim = get_or<std::size_t>(j, "dim", spec.dim, where);
  spec.hash_seed = get_or<std::uint64_t>(j, "seed", seed, where);
  spec.endpoint = get_or<std::string>(j, "endpoint", "", where);
  spec.batch_size = get_or<std::size_t>(j, "batch_size", spec.batch_size, where);
  spec.max_in_flight = get_or<std::size_t>(j, "max_in_flight", spec.max_in_flight, where);
  spec.max_retries = get_or<int>(j, "max_retries", spec.max_retries, where);
  spec.initial_backoff_ms = get_or<int>(j, "initial_backoff_ms", spec.initial_backoff_ms, where);
  spec.timeout_seconds = get_or<int>(j, "timeout_seconds", spec.timeout_seconds, where);
  if (spec.kind == embedding::EmbedderSpec::Kind::RemoteService && spec.endpoint.empty()) {
    throw ConfigError(where + ": remote embedder needs an endpoint");
  }
  if (spec.kind == embedding::EmbedderSpec::Kind::DeterministicTest && spec.dim == 0) {
    throw ConfigError(where + ": hashing embedder needs dim >= 1");
  }
  if (spec.batch_size == 0) throw ConfigError(where + ": batch_size must be >= 1");
}

StageConfig parse_stage(const json& block, const PipelineConfig& cfg, const fs::path& base) {
  if (!block.is_object() || !block.contains("stage")) {
    throw ConfigError("every stage needs a \"stage\" name");
  }
  StageConfig st;
  st.kind = parse_stage_kind(block.at("stage").get<std::string>());
  const std::string where = "stage " + stage_name(st.kind);
  std::set<std::string> common = {"stage", "device", "device_count", "step_devices"};
  auto allow = [&](std::set<std::string> extra) {
    extra.insert(common.begin(), common.end());
    check_keys(block, extra, where);
  };

  st.device.device = get_or<std::string>(block, "device", "cpu", where);
  st.device.count = get_or<std::int64_t>(block, "device_count", 1, where);
  if (auto it = block.find("step_devices"); it != block.end()) {
    if (!it->is_object()) throw ConfigError(where + ": step_devices must be an object");
    for (const auto& [step, use] : it->items()) {
      check_keys(use, {"device", "count"}, where + ".step_devices." + step);
      st.step_devices[step] = parse_device_use(use, where);
    }
  }
  st.params = block;
  for (const auto& k : common) st.params.erase(k);

  const auto seed = stage_seed(block, cfg.seed, st.kind, where);
  switch (st.kind) {
    case StageKind::Filter: {
      allow({"model", "threshold", "target_tokens"});
      st.filter.model = resolve(get_or<std::string>(block, "model", "", where), base);
      if (st.filter.model.empty()) throw ConfigError(where + ": model is required");
      if (block.contains("threshold")) st.filter.threshold = get_or<double>(block, "threshold", 0, where);
      if (block.contains("target_tokens")) {
        st.filter.target_tokens = get_or<std::uint64_t>(block, "target_tokens", 0, where);
      }
      if (st.filter.threshold.has_value() == st.filter.target_tokens.has_value()) {
        throw ConfigError(where + ": give exactly one of threshold and target_tokens");
      }
      break;
    }
    case StageKind::MinHash: {
      allow({"bands", "rows", "shingle", "seed"});
      st.minhash.bands = get_or<int>(block, "bands", 20, where);
      st.minhash.rows_per_band = get_or<int>(block, "rows", 20, where);
      st.minhash.shingle_size = get_or<int>(block, "shingle", 5, where);
      st.minhash.hash_seed = seed;
      break;
    }
    case StageKind::Embed: {
      allow({"embedder", "level", "max_tokens", "docs_per_batch", "seed"});
      parse_embedder(block.value("embedder", json::object()), seed, st.embed.embedder);
      st.embed.options.level = parse_level(get_or<std::string>(block, "level", "doc", where), where);
      st.embed.options.max_tokens =
          get_or<std::size_t>(block, "max_tokens", embedding::kDefaultChunkTokens, where);
      st.embed.options.docs_per_batch = get_or<std::size_t>(block, "docs_per_batch", 256, where);
      st.embed.options.request_batch = st.embed.embedder.batch_size;
      if (st.embed.options.max_tokens == 0) throw ConfigError(where + ": max_tokens must be >= 1");
      if (st.embed.options.docs_per_batch == 0) {
        throw ConfigError(where + ": docs_per_batch must be >= 1");
      }
      break;
    }
    case StageKind::SemDedup: {
      allow({"clusters", "tau", "level", "keep", "threshold_mode", "seed", "max_iters", "tol",
             "max_cluster_size", "chunk_output"});
      auto& s = st.semdedup;
      s.n_clusters = get_or<std::size_t>(block, "clusters", 1000, where);
      s.tau = get_or<double>(block, "tau", 0.15, where);
      s.level = parse_level(get_or<std::string>(block, "level", "doc", where), where);
      const auto keep = get_or<std::string>(block, "keep", "farthest", where);
      if (keep == "farthest") {
        s.keep = semdedup::KeepPolicy::FarthestFromCentroid;
      } else if (keep == "smallest-id") {
        s.keep = semdedup::KeepPolicy::SmallestId;
      } else {
        throw ConfigError(where + ": keep must be farthest or smallest-id");
      }
      const auto mode = get_or<std::string>(block, "threshold_mode", "distance", where);
      if (mode == "distance") {
        s.mode = semdedup::ThresholdMode::CosineDistance;
      } else if (mode == "similarity") {
        s.mode = semdedup::ThresholdMode::CosineSimilarity;
      } else {
        throw ConfigError(where + ": threshold_mode must be distance or similarity");
      }
      s.seed = seed;
      s.max_iters = get_or<int>(block, "max_iters", 100, where);
      s.tol = get_or<double>(block, "tol", 1e-6, where);
      s.max_cluster_size = get_or<std::size_t>(block, "max_cluster_size", 200000, where);
      s.chunk_corpus_output = get_or<bool>(block, "chunk_output", false, where);
      s.workers = cfg.workers;
      s.validate();
      break;
    }
    case StageKind::D4: {
      allow({"clusters", "r_proto", "seed", "max_iters", "tol"});
      auto& d = st.d4;
      d.recluster_k = get_or<std::size_t>(block, "clusters", 0, where);
      d.r_proto = get_or<double>(block, "r_proto", 0.75, where);
      d.seed = seed;
      d.max_iters = get_or<int>(block, "max_iters", 100, where);
      d.tol = get_or<double>(block, "tol", 1e-6, where);
      d.workers = cfg.workers;
      break;
    }
  }
  return st;
}

}  // namespace

std::string stage_name(StageKind kind) {
  switch (kind) {
    case StageKind::Filter: return "filter";
    case StageKind::MinHash: return "minhash";
    case StageKind::Embed: return "embed";
    case StageKind::SemDedup: return "semdedup";
    case StageKind::D4: return "d4";
  }
  return "?";
}

StageKind parse_stage_kind(const std::string& name) {
  for (auto k : {StageKind::Filter, StageKind::MinHash, StageKind::Embed, StageKind::SemDedup,
                 StageKind::D4}) {
    if (stage_name(k) == name) return k;
  }
  throw ConfigError("unknown stage '" + name + "'");
}

void PipelineConfig::validate() const {
  if (input.empty()) throw ConfigError("input is required");
  if (output.empty()) throw ConfigError("output is required");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (max_per_shard < 1) throw ConfigError("max_per_shard must be >= 1");
  if (stages.empty()) throw ConfigError("no stages configured");

  int last = -1;
  const StageConfig* embed = nullptr;
  const StageConfig* sem = nullptr;
  for (const auto& st : stages) {
    const int rank = static_cast<int>(st.kind);
    if (rank <= last) {
      throw ConfigError("stage '" + stage_name(st.kind) +
                        "' is out of order; stages run as filter, minhash, embed, semdedup, d4, "
                        "each at most once");
    }
    last = rank;
    if (st.kind == StageKind::Embed) embed = &st;
    if (st.kind == StageKind::SemDedup) {
      if (!embed) throw ConfigError("semdedup needs an embed stage before it");
      if (embed->embed.options.level != st.semdedup.level) {
        throw ConfigError("semdedup level must match the embed stage level");
      }
      sem = &st;
    }
    if (st.kind == StageKind::D4) {
      if (!sem) throw ConfigError("d4 needs a semdedup stage before it");
      if (sem->semdedup.level != embedding::Level::Document) {
        throw ConfigError("d4 needs document-level semdedup");
      }
      st.d4.validate();
    }
    if (st.kind == StageKind::MinHash) st.minhash.validate();
    if (st.kind == StageKind::SemDedup) st.semdedup.validate();

    auto check_device = [&](const DeviceUse& d) {
      auto it = device_tdp.find(d.device);
      if (it == device_tdp.end()) {
        throw ConfigError("stage '" + stage_name(st.kind) + "' uses undeclared device '" +
                          d.device + "'");
      }
      energy::DeviceSpec{d.device, it->second, d.count}.validate();
    };
    check_device(st.device);
    for (const auto& [step, d] : st.step_devices) check_device(d);
  }
}

energy::DeviceSpec PipelineConfig::device_for(const StageConfig& stage,
                                              const std::string& step) const {
  const DeviceUse* use = &stage.device;
  if (auto it = stage.step_devices.find(step); it != stage.step_devices.end()) use = &it->second;
  return {use->device, device_tdp.at(use->device), use->count};
}

PipelineConfig parse_config(const std::string& text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  const std::string where = "config";
  check_keys(j, {"input", "output", "seed", "workers", "max_per_shard", "tokenizer", "devices",
                 "stages"},
             where);
  PipelineConfig cfg;
  cfg.input = resolve(get_or<std::string>(j, "input", "", where), base_dir);
  cfg.output = resolve(get_or<std::string>(j, "output", "", where), base_dir);
  cfg.seed = get_or<std::uint64_t>(j, "seed", 0, where);
  cfg.workers = get_or<unsigned>(j, "workers", 1, where);
  cfg.max_per_shard = get_or<std::size_t>(j, "max_per_shard", 100000, where);
  if (auto it = j.find("tokenizer"); it != j.end()) {
    check_keys(*it, {"kind", "vocab"}, "tokenizer");
    cfg.tokenizer.kind = get_or<std::string>(*it, "kind", "whitespace", "tokenizer");
    cfg.tokenizer.vocab_path = resolve(get_or<std::string>(*it, "vocab", "", "tokenizer"), base_dir);
  }
  cfg.device_tdp = {{"cpu", 3.75}};
  if (auto it = j.find("devices"); it != j.end()) {
    if (!it->is_object()) throw ConfigError("devices must be an object");
    for (const auto& [name, d] : it->items()) {
      check_keys(d, {"tdp_watts"}, "devices." + name);
      cfg.device_tdp[name] = get_or<double>(d, "tdp_watts", 0.0, "devices." + name);
    }
  }
  if (!j.contains("stages") || !j["stages"].is_array()) throw ConfigError("stages must be a list");
  try {
    for (const auto& block : j["stages"]) cfg.stages.push_back(parse_stage(block, cfg, base_dir));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad stage block: ") + e.what());
  }
  for (auto& st : cfg.stages) {
    if (st.kind == StageKind::D4 && st.d4.recluster_k == 0) {
      // Defaults to the semdedup cluster count.
      st.d4.recluster_k = 1000;
      for (const auto& other : cfg.stages) {
        if (other.kind == StageKind::SemDedup) st.d4.recluster_k = other.semdedup.n_clusters;
      }
    }
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const fs::path& file) {
  std::string text;
  try {
    text = io::read_file(file);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, file.parent_path());
}

std::string canonical_stage_config(const PipelineConfig& cfg, const StageConfig& st) {
  json j;
  j["stage"] = stage_name(st.kind);
  j["tokenizer"] = {{"kind", cfg.tokenizer.kind}};
  if (!cfg.tokenizer.vocab_path.empty()) {
    j["tokenizer"]["vocab_hash"] = hex64(fnv1a64(io::read_file(cfg.tokenizer.vocab_path)));
  }
  j["max_per_shard"] = cfg.max_per_shard;
  switch (st.kind) {
    case StageKind::Filter:
      j["model_hash"] = hex64(fnv1a64(io::read_file(st.filter.model)));
      if (st.filter.threshold) j["threshold"] = *st.filter.threshold;
      if (st.filter.target_tokens) j["target_tokens"] = *st.filter.target_tokens;
      break;
    case StageKind::MinHash:
      j["bands"] = st.minhash.bands;
      j["rows"] = st.minhash.rows_per_band;
      j["shingle"] = st.minhash.shingle_size;
      j["seed"] = st.minhash.hash_seed;
      break;
    case StageKind::Embed: {
      const auto& e = st.embed.embedder;
      j["embedder"] = {{"kind", e.kind == embedding::EmbedderSpec::Kind::DeterministicTest
                                    ? "hashing"
                                    : "remote"},
                       {"dim", e.dim}};
      if (e.kind == embedding::EmbedderSpec::Kind::DeterministicTest) {
        j["embedder"]["seed"] = e.hash_seed;
      } else {
        j["embedder"]["endpoint"] = e.endpoint;
      }
      j["level"] = level_name(st.embed.options.level);
      j["max_tokens"] = st.embed.options.max_tokens;
      break;
    }
    case StageKind::SemDedup: {
      const auto& s = st.semdedup;
      j["clusters"] = s.n_clusters;
      j["tau"] = s.tau;
      j["level"] = level_name(s.level);
      j["keep"] = s.keep == semdedup::KeepPolicy::FarthestFromCentroid ? "farthest" : "smallest-id";
      j["threshold_mode"] = s.mode == semdedup::ThresholdMode::CosineDistance ? "distance"
                                                                              : "similarity";
      j["seed"] = s.seed;
      j["max_iters"] = s.max_iters;
      j["tol"] = s.tol;
      j["max_cluster_size"] = s.max_cluster_size;
      j["chunk_output"] = s.chunk_corpus_output;
      break;
    }
    case StageKind::D4:
      j["clusters"] = st.d4.recluster_k;
      j["r_proto"] = st.d4.r_proto;
      j["seed"] = st.d4.seed;
      j["max_iters"] = st.d4.max_iters;
      j["tol"] = st.d4.tol;
      break;
  }
  return j.dump();
}

std::uint64_t stage_config_hash(const PipelineConfig& cfg, const StageConfig& stage) {
  return fnv1a64(canonical_stage_config(cfg, stage));
}

}  // namespace corpusforge::pipeline
