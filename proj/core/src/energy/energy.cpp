#include "corpusforge/energy/energy.hpp"

#include <cmath>
#include <cstdio>
#include <map>

#include <nlohmann/json.hpp>

#include "corpusforge/util/error.hpp"

namespace corpusforge::energy {

using json = nlohmann::json;

void DeviceSpec::validate() const {
  if (!(tdp_watts > 0.0) || !std::isfinite(tdp_watts)) {
    throw ConfigError("device '" + name + "': tdp_watts must be > 0");
  }
  if (count < 1) throw ConfigError("device '" + name + "': count must be >= 1");
}

double stage_energy_wh(double wall_hours, const DeviceSpec& devices) {
  devices.validate();
  if (!(wall_hours >= 0.0)) throw ConfigError("wall_hours must be >= 0");
  return wall_hours * static_cast<double>(devices.count) * devices.tdp_watts;
}

void TrainingRunSpec::validate() const {
  devices.validate();
  if (total_steps < 1) throw ConfigError("total_steps must be >= 1");
  if (!(wall_hours >= 0.0)) throw ConfigError("wall_hours must be >= 0");
}

double training_energy_at_step(const TrainingRunSpec& run, std::int64_t step) {
  run.validate();
  if (step < 0 || step > run.total_steps) {
    throw ConfigError("step " + std::to_string(step) + " outside [0, " +
                      std::to_string(run.total_steps) + "]");
  }
  const double full = stage_energy_wh(run.wall_hours, run.devices);
  return full * static_cast<double>(step) / static_cast<double>(run.total_steps);
}

double wall_hours_for_energy(double full_wh, const DeviceSpec& devices) {
  devices.validate();
  return full_wh / (static_cast<double>(devices.count) * devices.tdp_watts);
}

double net_gain_percent(double full_wh, double equiv_wh, double overhead_wh) {
  if (!(full_wh > 0.0)) throw ConfigError("full_wh must be > 0");
  return 100.0 * (full_wh - equiv_wh - overhead_wh) / full_wh;
}

EnergySummary summarize(const std::vector<StageCost>& stages) {
  EnergySummary s;
  std::map<std::string, std::size_t> index;
  for (const auto& st : stages) {
    const double wh = st.wh();
    s.stage_wh.push_back(wh);
    auto [it, fresh] = index.emplace(st.group, s.groups.size());
    if (fresh) s.groups.push_back({st.group, 0.0});
    s.groups[it->second].wh += wh;
  }
  // Total from group subtotals so the printed numbers add up.
  for (const auto& g : s.groups) s.total_wh += g.wh;
  return s;
}

std::vector<StageCost> stage_costs_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("energy inventory: ") + e.what());
  }
  try {
    std::map<std::string, double> tdp;
    for (const auto& [name, d] : j.at("devices").items()) tdp[name] = d.at("tdp_watts").get<double>();
    std::vector<StageCost> out;
    for (const auto& row : j.at("stages")) {
      StageCost c;
      c.group = row.value("group", "");
      c.stage = row.at("stage").get<std::string>();
      if (row.contains("minutes")) {
        c.wall_hours = row.at("minutes").get<double>() / 60.0;
      } else {
        c.wall_hours = row.at("hours").get<double>();
      }
      c.devices.name = row.at("device").get<std::string>();
      auto it = tdp.find(c.devices.name);
      if (it == tdp.end()) throw ConfigError("unknown device '" + c.devices.name + "'");
      c.devices.tdp_watts = it->second;
      c.devices.count = row.value("count", std::int64_t{1});
      c.devices.validate();
      out.push_back(std::move(c));
    }
    return out;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("energy inventory: ") + e.what());
  }
}

std::string format_summary(const std::vector<StageCost>& stages, const EnergySummary& summary) {
  std::string out;
  char buf[256];
  std::string group;
  auto subtotal = [&](const std::string& g) {
    for (const auto& t : summary.groups) {
      if (t.group == g) {
        std::snprintf(buf, sizeof buf, "  %-28s %26.1f Wh\n", (g + " total").c_str(), t.wh);
        out += buf;
      }
    }
  };
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& st = stages[i];
    if (i > 0 && st.group != group) subtotal(group);
    group = st.group;
    std::snprintf(buf, sizeof buf, "  %-28s %8.2fh x %3lld %-8s %8.1f Wh\n", st.stage.c_str(),
                  st.wall_hours, static_cast<long long>(st.devices.count),
                  st.devices.name.c_str(), summary.stage_wh[i]);
    out += buf;
  }
  if (!stages.empty()) subtotal(group);
  std::snprintf(buf, sizeof buf, "  %-28s %26.1f Wh\n", "total", summary.total_wh);
  out += buf;
  return out;
}

}  // namespace corpusforge::energy
