#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace corpusforge::energy {

// Energy is TDP x wall time, no utilization factor, so every figure here is
// an upper bound on what the hardware actually drew.

struct DeviceSpec {
  std::string name;
  double tdp_watts = 0.0;
  std::int64_t count = 1;

  /// Throws ConfigError unless tdp_watts > 0 and count >= 1.
  void validate() const;
};

/// wall_hours x count x tdp_watts. Throws ConfigError for negative hours.
double stage_energy_wh(double wall_hours, const DeviceSpec& devices);

struct TrainingRunSpec {
  std::int64_t total_steps = 0;
  double wall_hours = 0.0;
  DeviceSpec devices;

  void validate() const;
};

/// Linear in the step count: (step / total_steps) x full-run energy.
/// Throws ConfigError when step is outside [0, total_steps].
double training_energy_at_step(const TrainingRunSpec& run, std::int64_t step);

/// Wall hours implied by a full-run energy figure on the given devices.
double wall_hours_for_energy(double full_wh, const DeviceSpec& devices);

/// 100 x (full - equiv - overhead) / full. Throws ConfigError if full <= 0.
double net_gain_percent(double full_wh, double equiv_wh, double overhead_wh);

/// One measured stage: how long it ran and on what.
struct StageCost {
  std::string group;  // e.g. "minhash"; subtotals are per group
  std::string stage;
  double wall_hours = 0.0;
  DeviceSpec devices;

  double wh() const { return stage_energy_wh(wall_hours, devices); }
};

struct GroupTotal {
  std::string group;
  double wh = 0.0;
};

struct EnergySummary {
  std::vector<double> stage_wh;     // parallel to the input rows
  std::vector<GroupTotal> groups;   // in order of first appearance
  double total_wh = 0.0;
};

EnergySummary summarize(const std::vector<StageCost>& stages);

/// Parses {"devices": {name: {"tdp_watts": w}}, "stages": [{"group", "stage",
/// "hours" | "minutes", "device", "count"}]}. Throws ConfigError.
std::vector<StageCost> stage_costs_from_json(const std::string& text);

std::string format_summary(const std::vector<StageCost>& stages, const EnergySummary& summary);

}  // namespace corpusforge::energy
