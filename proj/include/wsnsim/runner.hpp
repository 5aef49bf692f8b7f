#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "wsnsim/config.hpp"
#include "wsnsim/network.hpp"

namespace wsn {

inline std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline RunResult run_scenario(const ScenarioConfig& cfg, std::uint64_t seed,
                              bool check = false) {
  ScenarioConfig c = cfg;
  c.seed = seed;
  Network net(c, seed, check);
  return net.run();
}

// ---- file outputs ----------------------------------------------------------

inline const char* kRunCsvHeader =
    "node_id,avg_power_mw,mcu_mw,radio_idle_mw,radio_tx_mw,flash_mw,"
    "generated,delivered\n";

inline std::string run_csv_text(const RunResult& r) {
  std::string out = kRunCsvHeader;
  for (const auto& n : r.nodes) {
    out += std::to_string(n.id) + "," + fmt_g(n.avg_power_mw) + "," +
           fmt_g(n.components.mcu) + "," + fmt_g(n.components.radio_idle) +
           "," + fmt_g(n.components.radio_tx) + "," +
           fmt_g(n.components.flash) + "," + std::to_string(n.generated) +
           "," + std::to_string(n.delivered) + "\n";
  }
  return out;
}

inline json result_to_json(const RunResult& r) {
  json j;
  j["seed"] = r.seed;
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(r.trace_hash));
  j["trace_hash"] = hash;
  j["events"] = r.events;
  j["avg_power_mw"] = r.avg_power_mw;
  j["max_power_mw"] = r.max_power_mw;
  j["yield"] = {{"generated", r.generated},
                {"delivered", r.delivered},
                {"duplicates_at_app", r.duplicates_at_app},
                {"overflow_dropped", r.overflow_dropped},
                {"yield_pct", r.yield_pct}};
  j["latency_s"] = {{"p50", r.latency_p50_s},
                    {"p90", r.latency_p90_s},
                    {"p99", r.latency_p99_s}};
  j["unicast"] = {{"acked", r.unicast.acked},
                  {"nacked", r.unicast.nacked},
                  {"busy", r.unicast.busy},
                  {"noack_no_strobe_ack", r.unicast.noack_no_strobe_ack},
                  {"noack_payload", r.unicast.noack_payload},
                  {"strobes", r.unicast.strobes}};
  auto kind_name = [](FrameKind k) {
    switch (k) {
      case FrameKind::Strobe: return "strobe";
      case FrameKind::StrobeAck: return "strobe_ack";
      case FrameKind::Data: return "data";
      case FrameKind::DataAck: return "data_ack";
      case FrameKind::DataNack: return "data_nack";
      case FrameKind::Beacon: return "beacon";
    }
    return "?";
  };
  j["frame_fates"] = json::object();
  for (const auto& [kind, fc] : r.fates)
    j["frame_fates"][kind_name(kind)] = {{"delivered", fc.delivered},
                                         {"prr_lost", fc.prr_lost},
                                         {"collided", fc.collided},
                                         {"deaf", fc.deaf}};
  j["nacks_sent"] = r.nacks_sent;
  j["data_tx_attempts"] = r.data_tx_attempts;
  j["frames_sent"] = r.frames_sent;
  j["bookkeeping"] = {
      {"time_partition_ok", r.time_partition_ok},
      {"max_phase_energy_residual_uj", r.max_phase_energy_residual_uj}};
  for (const auto& [pid, cp] : r.breakdown) {
    j["breakdown"][to_string(pid)] = {{"mcu_mw", cp.mcu},
                                      {"radio_idle_mw", cp.radio_idle},
                                      {"radio_tx_mw", cp.radio_tx},
                                      {"flash_mw", cp.flash},
                                      {"total_mw", cp.total()}};
  }
  json nodes = json::array();
  for (const auto& n : r.nodes) {
    nodes.push_back({{"node_id", n.id},
                     {"avg_power_mw", n.avg_power_mw},
                     {"generated", n.generated},
                     {"delivered", n.delivered}});
  }
  j["nodes"] = std::move(nodes);
  j["warnings"] = r.warnings;
  return j;
}

inline void write_file(const std::filesystem::path& p, const std::string& s) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  f << s;
}

inline void write_run_outputs(const std::filesystem::path& dir,
                              const ScenarioConfig& cfg, const RunResult& r) {
  std::string seed = std::to_string(r.seed);
  write_file(dir / ("run_" + seed + ".csv"), run_csv_text(r));
  write_file(dir / ("summary_" + seed + ".json"),
             result_to_json(r).dump(2) + "\n");
  write_file(dir / "config.resolved.json",
             scenario_to_json(cfg).dump(2) + "\n");
}

// ---- sweep ---------------------------------------------------------------

struct SweepRow {
  double t_pull_s = 0.0;  // 0 for the push baseline
  std::string mode;
  std::uint64_t seed = 0;
  double avg_power_mw = 0.0;
  double max_power_mw = 0.0;
  double yield_pct = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  // Full results for downstream analysis, keyed by (t_pull µs or 0, seed).
  std::map<std::pair<SimTime, std::uint64_t>, RunResult> results;
};

// Re-derives a runnable config for one sweep point; windows are recomputed.
inline ScenarioConfig sweep_point_config(const ScenarioConfig& base,
                                         Mode mode, SimTime t_pull) {
  ScenarioConfig c = base;
  c.mode = mode;
  c.run_duration = 0;
  c.stats_window.reset();
  if (mode == Mode::Pull) c.pull.t_pull = t_pull;
  std::vector<std::string> diags;
  resolve_scenario(c, diags);
  if (!diags.empty()) throw ConfigError(std::move(diags));
  return c;
}

inline const char* kSweepCsvHeader =
    "t_pull_s,mode,seed,avg_power_mw,max_power_mw,yield_pct\n";

inline SweepResult run_sweep(const ScenarioConfig& base,
                             const std::vector<SimTime>& t_pulls,
                             const std::vector<std::uint64_t>& seeds,
                             bool check = false) {
  SweepResult out;
  for (std::uint64_t seed : seeds) {
    ScenarioConfig push = sweep_point_config(base, Mode::Push, 0);
    RunResult r = run_scenario(push, seed, check);
    out.rows.push_back(SweepRow{0.0, "push", seed, r.avg_power_mw,
                                r.max_power_mw, r.yield_pct});
    out.results.emplace(std::make_pair(SimTime(0), seed), std::move(r));
  }
  for (SimTime tp : t_pulls) {
    for (std::uint64_t seed : seeds) {
      ScenarioConfig pull = sweep_point_config(base, Mode::Pull, tp);
      RunResult r = run_scenario(pull, seed, check);
      out.rows.push_back(SweepRow{to_seconds(tp), "pull", seed,
                                  r.avg_power_mw, r.max_power_mw,
                                  r.yield_pct});
      out.results.emplace(std::make_pair(tp, seed), std::move(r));
    }
  }
  return out;
}

inline std::string sweep_csv_text(const SweepResult& s) {
  std::string out = kSweepCsvHeader;
  for (const auto& row : s.rows) {
    out += fmt_g(row.t_pull_s) + "," + row.mode + "," +
           std::to_string(row.seed) + "," + fmt_g(row.avg_power_mw) + "," +
           fmt_g(row.max_power_mw) + "," + fmt_g(row.yield_pct) + "\n";
  }
  return out;
}

inline std::string sweep_agg_csv_text(const SweepResult& s) {
  struct Acc {
    std::vector<double> avg, max, yield;
  };
  std::map<std::pair<double, std::string>, Acc> groups;
  for (const auto& row : s.rows) {
    auto& g = groups[{row.t_pull_s, row.mode}];
    g.avg.push_back(row.avg_power_mw);
    g.max.push_back(row.max_power_mw);
    g.yield.push_back(row.yield_pct);
  }
  auto mean = [](const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    return v.empty() ? 0.0 : m / double(v.size());
  };
  auto stderr_ = [&](const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = mean(v), ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / double(v.size() - 1)) / std::sqrt(double(v.size()));
  };
  std::string out =
      "t_pull_s,mode,n,avg_power_mw_mean,avg_power_mw_stderr,"
      "max_power_mw_mean,max_power_mw_stderr,yield_pct_mean\n";
  for (const auto& [key, g] : groups) {
    out += fmt_g(key.first) + "," + key.second + "," +
           std::to_string(g.avg.size()) + "," + fmt_g(mean(g.avg)) + "," +
           fmt_g(stderr_(g.avg)) + "," + fmt_g(mean(g.max)) + "," +
           fmt_g(stderr_(g.max)) + "," + fmt_g(mean(g.yield)) + "\n";
  }
  return out;
}

// ---- phase/component breakdown --------------------------------------------

inline const char* kBreakdownCsvHeader = "phase,component,avg_power_mw\n";

inline std::string breakdown_csv_text(const RunResult& r) {
  std::string out = kBreakdownCsvHeader;
  const char* comps[] = {"mcu", "radio_idle", "radio_tx", "flash"};
  for (const auto& [pid, cp] : r.breakdown) {
    double vals[] = {cp.mcu, cp.radio_idle, cp.radio_tx, cp.flash};
    for (int i = 0; i < 4; ++i)
      out += std::string(to_string(pid)) + "," + comps[i] + "," +
             fmt_g(vals[i]) + "\n";
  }
  return out;
}

inline std::vector<SimTime> default_sweep_intervals() {
  return {sec(100), sec(300), sec(600), sec(1200), sec(1800), sec(3600)};
}

}  // namespace wsn
