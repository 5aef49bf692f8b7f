#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "wsnsim/energy.hpp"
#include "wsnsim/mac.hpp"
#include "wsnsim/phase.hpp"
#include "wsnsim/routing.hpp"
#include "wsnsim/topology.hpp"

namespace wsn {

using json = nlohmann::json;

struct ScenarioConfig {
  Mode mode = Mode::Push;
  std::uint64_t seed = 1;
  TopologySpec topology;
  MacConfig mac;
  RoutingConfig routing;
  PullConfig pull;
  PowerProfile power;
  SimTime sampling_interval = sec(45);
  SimTime run_duration = 0;  // 0: resolve from mode defaults
  std::uint32_t cycles = 3;  // pull: measured pull cycles after warm-up
  std::optional<std::pair<SimTime, SimTime>> stats_window;
  std::uint64_t events_per_second_cap = 20000000;

  // Resolved products (filled by resolve()).
  SimTime stats_from = 0;
  SimTime stats_to = 0;
  SimTime yield_cutoff = 0;
  bool explicit_max_collection = false;
  bool explicit_min_collection = false;
  bool explicit_quiescence = false;
};

namespace detail {

class FieldReader {
 public:
  FieldReader(const json& j, std::string path, std::vector<std::string>& diags)
      : j_(j), path_(std::move(path)), diags_(diags) {}

  ~FieldReader() {
    if (!j_.is_object()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        diags_.push_back(path_ + it.key() + ": unknown key");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  void duration(const std::string& key, SimTime& out, bool allow_zero = false) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    std::optional<SimTime> t;
    if (v.is_number_unsigned() || v.is_number_integer()) {
      auto raw = v.get<std::int64_t>();
      if (raw >= 0) t = static_cast<SimTime>(raw);
    } else if (v.is_string()) {
      t = parse_duration(v.get<std::string>());
    }
    if (!t) {
      diags_.push_back(path_ + key +
                       ": expected duration (integer microseconds or "
                       "\"10ms\"/\"4s\"/\"45s\"/\"30min\")");
      return;
    }
    if (*t == 0 && !allow_zero) {
      diags_.push_back(path_ + key + ": must be positive");
      return;
    }
    out = *t;
  }

  template <typename T>
  void number(const std::string& key, T& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number()) {
      diags_.push_back(path_ + key + ": expected a number");
      return;
    }
    out = v.get<T>();
  }

  void str(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_string()) {
      diags_.push_back(path_ + key + ": expected a string");
      return;
    }
    out = v.get<std::string>();
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void fail(const std::string& key, const std::string& msg) {
    diags_.push_back(path_ + key + ": " + msg);
  }

 private:
  const json& j_;
  std::string path_;
  std::vector<std::string>& diags_;
  std::set<std::string> seen_;
};

inline void parse_topology(const json& j, TopologySpec& out,
                           std::vector<std::string>& diags) {
  FieldReader r(j, "topology.", diags);
  if (r.has("links")) {
    const json& links = r.raw("links");
    if (!links.is_array()) {
      r.fail("links", "expected an array");
      return;
    }
    std::vector<Link> list;
    for (std::size_t i = 0; i < links.size(); ++i) {
      FieldReader lr(links[i], "topology.links[" + std::to_string(i) + "].",
                     diags);
      Link l;
      lr.number("src", l.src);
      lr.number("dst", l.dst);
      lr.number("prr", l.prr);
      lr.duration("prop_delay", l.prop_delay, true);
      if (l.prr < 0.0 || l.prr > 1.0)
        lr.fail("prr", "must be within [0,1]");
      list.push_back(l);
    }
    out.links = std::move(list);
  }
  if (r.has("generator")) {
    GeneratorSpec g;
    FieldReader gr(r.raw("generator"), "topology.generator.", diags);
    std::string kind = "random_geometric";
    gr.str("kind", kind);
    if (kind == "grid") g.kind = GeneratorKind::Grid;
    else if (kind == "random_geometric") g.kind = GeneratorKind::RandomGeometric;
    else gr.fail("kind", "must be \"grid\" or \"random_geometric\"");
    gr.number("nodes", g.nodes);
    gr.number("seed", g.seed);
    if (gr.has("area")) {
      const json& a = gr.raw("area");
      if (a.is_array() && a.size() == 2 && a[0].is_number() && a[1].is_number()) {
        g.area_w = a[0].get<double>();
        g.area_h = a[1].get<double>();
      } else {
        gr.fail("area", "expected [width, height]");
      }
    }
    gr.number("full_prr_radius", g.full_prr_radius);
    gr.number("zero_prr_radius", g.zero_prr_radius);
    gr.number("grid_radius", g.grid_radius);
    if (g.nodes < 2) gr.fail("nodes", "need at least 2 nodes");
    if (g.zero_prr_radius <= g.full_prr_radius)
      gr.fail("zero_prr_radius", "must exceed full_prr_radius");
    out.generator = g;
  }
  if (out.links && out.generator)
    diags.push_back("topology: give either links or generator, not both");
  if (!out.links && !out.generator)
    diags.push_back("topology: needs links or generator");
}

}  // namespace detail

// Parses a scenario document; collects one diagnostic per violation.
inline ScenarioConfig parse_scenario(const json& j,
                                     std::vector<std::string>& diags) {
  ScenarioConfig c;
  detail::FieldReader r(j, "", diags);

  std::string mode;
  if (r.has("mode")) {
    r.str("mode", mode);
    if (mode == "push") c.mode = Mode::Push;
    else if (mode == "pull") c.mode = Mode::Pull;
    else r.fail("mode", "must be \"push\" or \"pull\"");
  } else {
    r.fail("mode", "required");
  }
  r.number("seed", c.seed);
  r.duration("sampling_interval", c.sampling_interval, true);
  r.duration("run_duration", c.run_duration, true);
  r.number("cycles", c.cycles);
  r.number("events_per_second_cap", c.events_per_second_cap);

  if (r.has("topology")) detail::parse_topology(r.raw("topology"), c.topology, diags);
  else c.topology.generator = GeneratorSpec{};  // default 35-node office floor

  if (r.has("mac")) {
    detail::FieldReader mr(r.raw("mac"), "mac.", diags);
    mr.duration("t_w", c.mac.t_w);
    mr.duration("t_cca", c.mac.t_cca);
    mr.duration("t_strobe", c.mac.t_strobe);
    mr.duration("t_gap", c.mac.t_gap);
    mr.duration("t_data_ack", c.mac.t_data_ack);
    mr.duration("backoff_base", c.mac.backoff_base);
    mr.duration("backoff_max", c.mac.backoff_max);
    mr.number("bit_rate_bps", c.mac.bit_rate_bps);
  }
  if (r.has("routing")) {
    detail::FieldReader rr(r.raw("routing"), "routing.", diags);
    rr.duration("beacon_period_push", c.routing.beacon_period_push, true);
    rr.duration("beacon_period_collection", c.routing.beacon_period_collection);
    rr.number("buffer_capacity", c.routing.buffer_capacity);
    rr.number("etx_alpha", c.routing.etx_alpha);
  }
  if (r.has("pull")) {
    detail::FieldReader pr(r.raw("pull"), "pull.", diags);
    pr.duration("t_pull", c.pull.t_pull);
    pr.duration("t_w_sleep", c.pull.t_w_sleep);
    pr.duration("t_w_collect", c.pull.t_w_collect);
    c.explicit_quiescence = pr.has("quiescence_timeout");
    pr.duration("quiescence_timeout", c.pull.quiescence_timeout);
    c.explicit_min_collection = pr.has("min_collection");
    pr.duration("min_collection", c.pull.min_collection);
    c.explicit_max_collection = pr.has("max_collection");
    pr.duration("max_collection", c.pull.max_collection);
    pr.number("flash_capacity", c.pull.flash_capacity);
    pr.number("record_size", c.pull.record_size);
  }
  if (r.has("power_profile")) {
    detail::FieldReader pr(r.raw("power_profile"), "power_profile.", diags);
    pr.number("p_radio_rx", c.power.p_radio_rx_mw);
    pr.number("p_radio_tx", c.power.p_radio_tx_mw);
    pr.number("p_radio_off", c.power.p_radio_off_mw);
    pr.number("p_mcu_active", c.power.p_mcu_active_mw);
    pr.number("p_mcu_sleep", c.power.p_mcu_sleep_mw);
    pr.number("e_flash_write", c.power.e_flash_write_uj_per_byte);
    pr.number("e_flash_read", c.power.e_flash_read_uj_per_byte);
  }
  if (r.has("stats_window")) {
    detail::FieldReader wr(r.raw("stats_window"), "stats_window.", diags);
    SimTime from = 0, to = 0;
    wr.duration("from", from, true);
    wr.duration("to", to);
    if (to <= from) wr.fail("to", "must exceed from");
    else c.stats_window = std::make_pair(from, to);
  }
  return c;
}

// Fills derived values and mode defaults; appends semantic diagnostics.
inline void resolve_scenario(ScenarioConfig& c,
                             std::vector<std::string>& diags) {
  // Pull phase bounds auto-scale with the pull interval unless pinned.
  if (c.mode == Mode::Pull) {
    if (!c.explicit_max_collection &&
        c.pull.max_collection >= c.pull.t_pull)
      c.pull.max_collection = c.pull.t_pull * 3 / 4;
    if (!c.explicit_min_collection &&
        c.pull.min_collection >= c.pull.max_collection)
      c.pull.min_collection =
          std::min(sec(60), c.pull.max_collection / 2);
    if (!c.explicit_quiescence &&
        c.pull.quiescence_timeout > c.pull.min_collection)
      c.pull.quiescence_timeout =
          std::min(sec(30), c.pull.min_collection / 2);
  }

  // MAC invariants.
  if (c.mac.t_cca < c.mac.t_strobe + c.mac.t_gap)
    diags.push_back("mac.t_cca: must be at least t_strobe + t_gap");
  if (c.mac.t_w <= c.mac.t_cca)
    diags.push_back("mac.t_w: must exceed t_cca");
  if (c.mac.backoff_base > c.mac.backoff_max)
    diags.push_back("mac.backoff_base: must not exceed backoff_max");
  if (c.mac.bit_rate_bps == 0)
    diags.push_back("mac.bit_rate_bps: must be positive");

  if (c.routing.buffer_capacity < 1)
    diags.push_back("routing.buffer_capacity: must be at least 1");
  if (c.routing.etx_alpha < 0.0 || c.routing.etx_alpha >= 1.0)
    diags.push_back("routing.etx_alpha: must be in [0,1)");

  if (c.mode == Mode::Pull) {
    if (c.pull.t_pull <= c.pull.max_collection)
      diags.push_back("pull.t_pull: must exceed max_collection");
    if (c.pull.t_w_sleep <= c.pull.t_w_collect)
      diags.push_back("pull.t_w_sleep: must exceed t_w_collect");
    if (c.pull.min_collection >= c.pull.max_collection)
      diags.push_back("pull.min_collection: must be below max_collection");
    if (c.pull.t_w_sleep <= c.mac.t_cca)
      diags.push_back("pull.t_w_sleep: must exceed mac.t_cca");
    if (c.pull.t_w_collect <= c.mac.t_cca)
      diags.push_back("pull.t_w_collect: must exceed mac.t_cca");
    if (c.pull.record_size == 0 ||
        c.pull.record_size > c.pull.flash_capacity)
      diags.push_back("pull.record_size: must be positive and fit the flash");
  }
  if (c.pull.record_size * kRecordsPerPacket + kDataHeaderBytes > 128)
    diags.push_back("pull.record_size: bundled payload exceeds 128-byte frames");

  const PowerProfile& p = c.power;
  if (p.p_radio_rx_mw < 0 || p.p_radio_tx_mw < 0 || p.p_radio_off_mw < 0 ||
      p.p_mcu_active_mw < 0 || p.p_mcu_sleep_mw < 0 ||
      p.e_flash_write_uj_per_byte < 0 || p.e_flash_read_uj_per_byte < 0)
    diags.push_back("power_profile: all values must be non-negative");
  if (p.p_radio_rx_mw <= p.p_radio_off_mw)
    diags.push_back("power_profile.p_radio_rx: must exceed p_radio_off");
  if (p.p_mcu_active_mw <= p.p_mcu_sleep_mw)
    diags.push_back("power_profile.p_mcu_active: must exceed p_mcu_sleep");

  // Run duration and measurement windows.
  if (c.mode == Mode::Push) {
    if (c.run_duration == 0) c.run_duration = minutes(120);
    SimTime warmup = std::min<SimTime>(sec(600), c.run_duration / 4);
    SimTime drain = std::min<SimTime>(sec(300), c.run_duration / 4);
    c.stats_from = warmup;
    c.stats_to = c.run_duration > drain ? c.run_duration - drain : c.run_duration;
    c.yield_cutoff = c.stats_to;
    if (c.stats_to <= c.stats_from)
      diags.push_back("run_duration: too short for a measurement window");
  } else {
    if (c.cycles < 1) diags.push_back("cycles: must be at least 1");
    SimTime last_collection = SimTime(c.cycles + 1) * c.pull.t_pull;
    // One further full collection after the last in-window one: packets
    // still sitting in intermediate buffers when it ends are carried over
    // and delivered in the next cycle.
    SimTime needed =
        last_collection + c.pull.t_pull + c.pull.max_collection + sec(120);
    if (c.run_duration == 0) c.run_duration = needed;
    else if (c.run_duration < needed)
      diags.push_back("run_duration: pull needs " + format_duration(needed) +
                      " to cover " + std::to_string(c.cycles + 1) +
                      " collection phases");
    c.stats_from = c.pull.t_pull;
    c.stats_to = last_collection;
    c.yield_cutoff = last_collection;
  }
  if (c.stats_window) {
    c.stats_from = c.stats_window->first;
    c.stats_to = c.stats_window->second;
    if (c.stats_to > c.run_duration)
      diags.push_back("stats_window.to: beyond run_duration");
  }
}

inline json scenario_to_json(const ScenarioConfig& c) {
  json j;
  j["mode"] = c.mode == Mode::Push ? "push" : "pull";
  j["seed"] = c.seed;
  j["sampling_interval"] = format_duration(c.sampling_interval);
  j["run_duration"] = format_duration(c.run_duration);
  j["cycles"] = c.cycles;
  j["events_per_second_cap"] = c.events_per_second_cap;
  if (c.topology.links) {
    json links = json::array();
    for (const auto& l : *c.topology.links)
      links.push_back({{"src", l.src},
                       {"dst", l.dst},
                       {"prr", l.prr},
                       {"prop_delay", format_duration(l.prop_delay)}});
    j["topology"]["links"] = std::move(links);
  }
  if (c.topology.generator) {
    const auto& g = *c.topology.generator;
    j["topology"]["generator"] = {
        {"kind", g.kind == GeneratorKind::Grid ? "grid" : "random_geometric"},
        {"nodes", g.nodes},
        {"seed", g.seed},
        {"area", {g.area_w, g.area_h}},
        {"full_prr_radius", g.full_prr_radius},
        {"zero_prr_radius", g.zero_prr_radius},
        {"grid_radius", g.grid_radius}};
  }
  j["mac"] = {{"t_w", format_duration(c.mac.t_w)},
              {"t_cca", format_duration(c.mac.t_cca)},
              {"t_strobe", format_duration(c.mac.t_strobe)},
              {"t_gap", format_duration(c.mac.t_gap)},
              {"t_data_ack", format_duration(c.mac.t_data_ack)},
              {"backoff_base", format_duration(c.mac.backoff_base)},
              {"backoff_max", format_duration(c.mac.backoff_max)},
              {"bit_rate_bps", c.mac.bit_rate_bps}};
  j["routing"] = {
      {"beacon_period_push", format_duration(c.routing.beacon_period_push)},
      {"beacon_period_collection",
       format_duration(c.routing.beacon_period_collection)},
      {"buffer_capacity", c.routing.buffer_capacity},
      {"etx_alpha", c.routing.etx_alpha}};
  j["pull"] = {{"t_pull", format_duration(c.pull.t_pull)},
               {"t_w_sleep", format_duration(c.pull.t_w_sleep)},
               {"t_w_collect", format_duration(c.pull.t_w_collect)},
               {"quiescence_timeout", format_duration(c.pull.quiescence_timeout)},
               {"min_collection", format_duration(c.pull.min_collection)},
               {"max_collection", format_duration(c.pull.max_collection)},
               {"flash_capacity", c.pull.flash_capacity},
               {"record_size", c.pull.record_size}};
  j["power_profile"] = {{"p_radio_rx", c.power.p_radio_rx_mw},
                        {"p_radio_tx", c.power.p_radio_tx_mw},
                        {"p_radio_off", c.power.p_radio_off_mw},
                        {"p_mcu_active", c.power.p_mcu_active_mw},
                        {"p_mcu_sleep", c.power.p_mcu_sleep_mw},
                        {"e_flash_write", c.power.e_flash_write_uj_per_byte},
                        {"e_flash_read", c.power.e_flash_read_uj_per_byte}};
  j["stats_window"] = {{"from", format_duration(c.stats_from)},
                       {"to", format_duration(c.stats_to)}};
  return j;
}

// Parse + resolve, throwing on any diagnostic.
struct ConfigError : std::runtime_error {
  explicit ConfigError(std::vector<std::string> d)
      : std::runtime_error(join(d)), diagnostics(std::move(d)) {}
  static std::string join(const std::vector<std::string>& d) {
    std::string s;
    for (const auto& m : d) s += m + "\n";
    return s;
  }
  std::vector<std::string> diagnostics;
};

inline ScenarioConfig load_scenario(const json& j) {
  std::vector<std::string> diags;
  ScenarioConfig c = parse_scenario(j, diags);
  if (diags.empty()) resolve_scenario(c, diags);
  if (!diags.empty()) throw ConfigError(std::move(diags));
  return c;
}

}  // namespace wsn
