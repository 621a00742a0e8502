#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "corpusforge/io/manifest.hpp"
#include "corpusforge/pipeline/config.hpp"
#include "corpusforge/pipeline/report.hpp"

namespace corpusforge::pipeline {

struct RunOptions {
  /// Called after each stage's completion marker is written. Tests use it to
  /// kill the process between stages.
  std::function<void(const std::string& stage)> after_stage;
  /// Stop cleanly once this stage is complete (empty: run everything).
  std::string halt_after;
};

struct RunResult {
  std::vector<StageReport> reports;
  io::CorpusManifest final_manifest;
  std::vector<std::string> skipped;  // stages reused from a previous run
  std::vector<std::string> executed;
  bool halted = false;
};

// Run directory layout: <output>/<NN>-<stage>/ per stage with a DONE marker
// holding the chained config hash and the stage's reports; <output>/
// manifest.json for the final corpus and <output>/reports.json.

inline constexpr const char* kMarkerFile = "DONE";
inline constexpr const char* kStageHashFile = "STAGE";
inline constexpr const char* kLockFile = ".lock";
inline constexpr const char* kReportsFile = "reports.json";

std::filesystem::path stage_dir(const PipelineConfig& cfg, std::size_t index);

/// Runs the configured stages in order, reusing every stage whose marker
/// matches the current hash chain. Throws ConfigError before touching
/// anything if the config is invalid, StageError if another run holds the
/// lock or a stage fails (state stays resumable).
RunResult run_pipeline(const PipelineConfig& cfg, const RunOptions& options = {});

/// Reports of the last completed run in an output directory.
std::vector<StageReport> load_reports(const std::filesystem::path& output_dir);

}  // namespace corpusforge::pipeline
