#include "corpusforge/pipeline/report.hpp"

#include <cstdio>
#include <map>

namespace corpusforge::pipeline {

using json = nlohmann::json;

void StageReport::set_device(const energy::DeviceSpec& d) {
  device = d.name;
  device_count = d.count;
  device_tdp_watts = d.tdp_watts;
  energy_wh = energy::stage_energy_wh(wall_hours, d);
}

json report_to_json(const StageReport& r) {
  return {{"stage", r.stage},
          {"step", r.step},
          {"group", r.group},
          {"docs_in", r.docs_in},
          {"docs_out", r.docs_out},
          {"tokens_in", r.tokens_in},
          {"tokens_out", r.tokens_out},
          {"wall_hours", r.wall_hours},
          {"device", r.device},
          {"device_count", r.device_count},
          {"device_tdp_watts", r.device_tdp_watts},
          {"energy_wh", r.energy_wh}};
}

StageReport report_from_json(const json& j) {
  StageReport r;
  r.stage = j.at("stage").get<std::string>();
  r.step = j.value("step", "");
  r.group = j.value("group", r.stage);
  r.docs_in = j.value("docs_in", std::uint64_t{0});
  r.docs_out = j.value("docs_out", std::uint64_t{0});
  r.tokens_in = j.value("tokens_in", std::uint64_t{0});
  r.tokens_out = j.value("tokens_out", std::uint64_t{0});
  r.wall_hours = j.value("wall_hours", 0.0);
  r.device = j.value("device", "");
  r.device_count = j.value("device_count", std::int64_t{1});
  r.device_tdp_watts = j.value("device_tdp_watts", 0.0);
  r.energy_wh = j.value("energy_wh", 0.0);
  return r;
}

Summary report_stats(const std::vector<StageReport>& reports) {
  Summary s;
  std::map<std::string, std::size_t> stage_index;
  std::map<std::string, std::size_t> group_index;
  for (const auto& r : reports) {
    auto [it, fresh] = stage_index.emplace(r.stage, s.stages.size());
    if (fresh) {
      s.stages.push_back({r.stage, r.docs_in, r.docs_out, r.tokens_in, r.tokens_out, 0.0, 0.0});
    }
    auto& d = s.stages[it->second];
    // Steps run in sequence, so the stage's output is its last step's.
    d.docs_out = r.docs_out;
    d.tokens_out = r.tokens_out;
    d.energy_wh += r.energy_wh;

    const std::string group = r.group.empty() ? r.stage : r.group;
    auto [g, gfresh] = group_index.emplace(group, s.energy_groups.size());
    if (gfresh) s.energy_groups.push_back({group, 0.0});
    s.energy_groups[g->second].wh += r.energy_wh;
  }

  double kept = 1.0;
  for (auto& d : s.stages) {
    d.removal_fraction =
        d.docs_in == 0 ? 0.0
                       : 1.0 - static_cast<double>(d.docs_out) / static_cast<double>(d.docs_in);
    kept *= 1.0 - d.removal_fraction;
  }
  if (!s.stages.empty()) {
    s.docs_in = s.stages.front().docs_in;
    s.docs_out = s.stages.back().docs_out;
    s.cumulative_removal = 1.0 - kept;
  }
  for (const auto& g : s.energy_groups) s.total_energy_wh += g.wh;
  return s;
}

json summary_to_json(const Summary& s, const std::vector<StageReport>& reports) {
  json stages = json::array();
  for (const auto& d : s.stages) {
    stages.push_back({{"stage", d.stage},
                      {"docs_in", d.docs_in},
                      {"docs_out", d.docs_out},
                      {"tokens_in", d.tokens_in},
                      {"tokens_out", d.tokens_out},
                      {"removal_fraction", d.removal_fraction},
                      {"energy_wh", d.energy_wh}});
  }
  json steps = json::array();
  for (const auto& r : reports) steps.push_back(report_to_json(r));
  json groups = json::object();
  for (const auto& g : s.energy_groups) groups[g.group] = g.wh;
  return {{"docs_in", s.docs_in},
          {"docs_out", s.docs_out},
          {"cumulative_removal", s.cumulative_removal},
          {"stages", stages},
          {"steps", steps},
          {"energy", {{"groups", groups}, {"total_wh", s.total_energy_wh}}}};
}

std::string summary_to_text(const Summary& s, const std::vector<StageReport>& reports) {
  std::string out;
  char buf[256];
  out += "stage         docs in    docs out   removed\n";
  for (const auto& d : s.stages) {
    std::snprintf(buf, sizeof buf, "%-10s %10llu %10llu    %6.2f%%\n", d.stage.c_str(),
                  static_cast<unsigned long long>(d.docs_in),
                  static_cast<unsigned long long>(d.docs_out), 100.0 * d.removal_fraction);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "cumulative removal: %.2f%% (%llu -> %llu docs)\n\n",
                100.0 * s.cumulative_removal, static_cast<unsigned long long>(s.docs_in),
                static_cast<unsigned long long>(s.docs_out));
  out += buf;
  out += "energy (TDP x wall time, upper bound)\n";
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "  %-10s %-14s %9.4fh x %3lld %-6s %10.1f Wh\n",
                  r.stage.c_str(), r.step.c_str(), r.wall_hours,
                  static_cast<long long>(r.device_count), r.device.c_str(), r.energy_wh);
    out += buf;
  }
  for (const auto& g : s.energy_groups) {
    std::snprintf(buf, sizeof buf, "  %-25s %31.1f Wh\n", (g.group + " total").c_str(), g.wh);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "  %-25s %31.1f Wh\n", "total", s.total_energy_wh);
  out += buf;
  return out;
}

}  // namespace corpusforge::pipeline
