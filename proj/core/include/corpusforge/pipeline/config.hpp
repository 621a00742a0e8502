#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "corpusforge/classifier/threshold.hpp"
#include "corpusforge/embedding/embedder.hpp"
#include "corpusforge/embedding/stage.hpp"
#include "corpusforge/energy/energy.hpp"
#include "corpusforge/io/tokenizer.hpp"
#include "corpusforge/minhash/minhash.hpp"
#include "corpusforge/semdedup/semdedup.hpp"

namespace corpusforge::pipeline {

enum class StageKind { Filter, MinHash, Embed, SemDedup, D4 };

std::string stage_name(StageKind kind);
StageKind parse_stage_kind(const std::string& name);

struct FilterParams {
  std::filesystem::path model;
  std::optional<double> threshold;
  std::optional<std::uint64_t> target_tokens;
};

struct EmbedParams {
  embedding::EmbedderSpec embedder;
  embedding::EmbedStageOptions options;
};

/// Device assignment for energy accounting, per stage with optional
/// per-step overrides (e.g. embeddings on a GPU, the rest on CPU cores).
struct DeviceUse {
  std::string device;
  std::int64_t count = 1;
};

struct StageConfig {
  StageKind kind = StageKind::Filter;
  nlohmann::json params;  // the stage's block as written, minus device fields
  DeviceUse device;
  std::map<std::string, DeviceUse> step_devices;

  FilterParams filter;
  minhash::MinHashParams minhash;
  EmbedParams embed;
  semdedup::SemDedupConfig semdedup;
  semdedup::D4Config d4;
};

struct PipelineConfig {
  std::filesystem::path input;   // manifest file or corpus directory
  std::filesystem::path output;  // run directory
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::size_t max_per_shard = 100000;
  io::TokenizerSpec tokenizer;
  std::map<std::string, double> device_tdp;  // name -> watts
  std::vector<StageConfig> stages;

  /// Checks stage order (filter -> minhash -> embed -> semdedup -> d4, each
  /// at most once, semdedup needs embed, d4 needs semdedup) and parameter
  /// ranges. Throws ConfigError.
  void validate() const;

  energy::DeviceSpec device_for(const StageConfig& stage, const std::string& step) const;
};

/// Parses the JSON config. Relative paths resolve against base_dir.
/// Throws ConfigError on anything malformed, including validation failure.
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& file);

/// Canonical rendering of everything that affects a stage's output (worker
/// count and devices excluded), and its hash.
std::string canonical_stage_config(const PipelineConfig& cfg, const StageConfig& stage);
std::uint64_t stage_config_hash(const PipelineConfig& cfg, const StageConfig& stage);

}  // namespace corpusforge::pipeline
