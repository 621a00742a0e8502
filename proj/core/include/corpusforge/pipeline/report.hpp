#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "corpusforge/energy/energy.hpp"

namespace corpusforge::pipeline {

/// One timed step of a stage (a stage may report several, e.g. MinHash
/// signatures, buckets, clusters and filtering).
struct StageReport {
  std::string stage;
  std::string step;
  std::string group;
  std::uint64_t docs_in = 0;
  std::uint64_t docs_out = 0;
  std::uint64_t tokens_in = 0;
  std::uint64_t tokens_out = 0;
  double wall_hours = 0.0;
  std::string device;
  std::int64_t device_count = 1;
  double device_tdp_watts = 0.0;
  double energy_wh = 0.0;

  /// Sets device fields and recomputes energy_wh.
  void set_device(const energy::DeviceSpec& d);

  friend bool operator==(const StageReport&, const StageReport&) = default;
};

nlohmann::json report_to_json(const StageReport& r);
StageReport report_from_json(const nlohmann::json& j);

struct StageDelta {
  std::string stage;
  std::uint64_t docs_in = 0;
  std::uint64_t docs_out = 0;
  std::uint64_t tokens_in = 0;
  std::uint64_t tokens_out = 0;
  double removal_fraction = 0.0;
  double energy_wh = 0.0;
};

struct Summary {
  std::vector<StageDelta> stages;  // steps of one stage merged
  std::uint64_t docs_in = 0;
  std::uint64_t docs_out = 0;
  double cumulative_removal = 0.0;
  std::vector<energy::GroupTotal> energy_groups;
  double total_energy_wh = 0.0;
};

/// Cumulative removal is 1 - prod(docs_out / docs_in) over stages.
Summary report_stats(const std::vector<StageReport>& reports);

nlohmann::json summary_to_json(const Summary& s, const std::vector<StageReport>& reports);
std::string summary_to_text(const Summary& s, const std::vector<StageReport>& reports);

}  // namespace corpusforge::pipeline
