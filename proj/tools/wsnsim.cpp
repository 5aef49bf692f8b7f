// Command-line front end: scenario validation, single runs, pull-interval
// sweeps, and phase/component breakdowns. Exit codes: 0 ok, 2 config error,
// 3 runtime invariant failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wsnsim/wsnsim.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

wsn::json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw wsn::ConfigError({path + ": cannot open"});
  try {
    return wsn::json::parse(f);
  } catch (const wsn::json::parse_error& e) {
    throw wsn::ConfigError({path + ": " + e.what()});
  }
}

wsn::ScenarioConfig load_config(const std::string& path) {
  return wsn::load_scenario(read_json_file(path));
}

int print_diags(const wsn::ConfigError& e) {
  for (const auto& d : e.diagnostics) std::cerr << "error: " << d << "\n";
  return kExitConfig;
}

std::vector<std::uint64_t> seed_list(std::uint64_t base, unsigned count) {
  std::vector<std::uint64_t> seeds;
  for (unsigned i = 0; i < count; ++i) seeds.push_back(base + i);
  return seeds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Duty-cycled sensor network data collection simulator "
               "(push vs. pull energy comparison)"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 1;
  unsigned n_seeds = 5;
  bool check = false;

  auto add_common = [&](CLI::App* cmd, bool need_out) {
    cmd->add_option("--config", config_path, "Scenario JSON file")->required();
    cmd->add_option("--seed", seed, "Base RNG seed");
    cmd->add_flag("--check", check, "Enable run-time audit invariants (slower)");
    if (need_out) cmd->add_option("--out", out_dir, "Output directory");
  };

  auto* cmd_run = app.add_subcommand("run", "Execute one scenario run");
  add_common(cmd_run, true);

  auto* cmd_sweep = app.add_subcommand(
      "sweep", "Pull-interval sweep plus push baseline, over several seeds");
  add_common(cmd_sweep, true);
  std::vector<std::string> t_pull_args;
  cmd_sweep->add_option("--t-pull", t_pull_args,
                        "Pull intervals (e.g. 100s 600s 3600s); default "
                        "100s,300s,600s,1200s,1800s,3600s");
  cmd_sweep->add_option("--seeds", n_seeds, "Number of seeds (base --seed)");

  auto* cmd_breakdown = app.add_subcommand(
      "breakdown", "Per-phase, per-component power breakdown (pull mode)");
  add_common(cmd_breakdown, true);

  auto* cmd_validate =
      app.add_subcommand("validate", "Validate and echo the resolved config");
  cmd_validate->add_option("--config", config_path, "Scenario JSON file")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_validate->parsed()) {
      wsn::ScenarioConfig cfg = load_config(config_path);
      wsn::load_topology(cfg.topology);  // reject broken graphs up front
      std::cout << wsn::scenario_to_json(cfg).dump(2) << "\n";
      return 0;
    }
    if (cmd_run->parsed()) {
      wsn::ScenarioConfig cfg = load_config(config_path);
      wsn::load_topology(cfg.topology);
      wsn::RunResult r = wsn::run_scenario(cfg, seed, check);
      cfg.seed = seed;
      wsn::write_run_outputs(out_dir, cfg, r);
      std::printf("seed %llu: avg %.4g mW, max %.4g mW, yield %.6g %% "
                  "(%llu/%llu records), %llu events\n",
                  (unsigned long long)seed, r.avg_power_mw, r.max_power_mw,
                  r.yield_pct, (unsigned long long)r.delivered,
                  (unsigned long long)r.generated,
                  (unsigned long long)r.events);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
      return 0;
    }
    if (cmd_sweep->parsed()) {
      wsn::ScenarioConfig cfg = load_config(config_path);
      if (cfg.mode != wsn::Mode::Pull)
        throw wsn::ConfigError({"mode: sweep needs a pull-mode base config"});
      wsn::load_topology(cfg.topology);
      std::vector<wsn::SimTime> t_pulls;
      for (const auto& a : t_pull_args) {
        auto t = wsn::parse_duration(a);
        if (!t || *t == 0)
          throw wsn::ConfigError({"--t-pull: bad duration '" + a + "'"});
        t_pulls.push_back(*t);
      }
      if (t_pulls.empty()) t_pulls = wsn::default_sweep_intervals();
      auto sw = wsn::run_sweep(cfg, t_pulls, seed_list(seed, n_seeds), check);
      wsn::write_file(std::filesystem::path(out_dir) / "sweep.csv",
                      wsn::sweep_csv_text(sw));
      wsn::write_file(std::filesystem::path(out_dir) / "sweep_agg.csv",
                      wsn::sweep_agg_csv_text(sw));
      std::cout << wsn::sweep_agg_csv_text(sw);
      return 0;
    }
    if (cmd_breakdown->parsed()) {
      wsn::ScenarioConfig cfg = load_config(config_path);
      if (cfg.mode != wsn::Mode::Pull)
        throw wsn::ConfigError({"mode: breakdown needs a pull-mode config"});
      wsn::load_topology(cfg.topology);
      wsn::RunResult r = wsn::run_scenario(cfg, seed, check);
      wsn::write_file(std::filesystem::path(out_dir) / "breakdown.csv",
                      wsn::breakdown_csv_text(r));
      std::cout << wsn::breakdown_csv_text(r);
      return 0;
    }
  } catch (const wsn::ConfigError& e) {
    return print_diags(e);
  } catch (const wsn::TopologyError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const wsn::LivelockError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::logic_error& e) {
    std::cerr << "invariant failure: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
