#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "wsnsim/channel.hpp"
#include "wsnsim/config.hpp"
#include "wsnsim/energy.hpp"
#include "wsnsim/kernel.hpp"
#include "wsnsim/mac.hpp"
#include "wsnsim/phase.hpp"
#include "wsnsim/routing.hpp"
#include "wsnsim/topology.hpp"

namespace wsn {

struct NodePowerReport {
  NodeId id = kNoNode;
  ComponentPower components;  // over the measurement window
  double avg_power_mw = 0.0;
  std::map<PhaseId, ComponentPower> per_phase;
  std::map<PhaseId, SimTime> phase_durations;  // window-clipped
  std::uint64_t generated = 0;
  std::uint64_t delivered = 0;
};

struct RunResult {
  std::uint64_t seed = 0;
  std::uint64_t trace_hash = 0;
  std::uint64_t events = 0;
  double wall_seconds = 0.0;

  std::vector<NodePowerReport> nodes;
  double avg_power_mw = 0.0;  // mean over non-sink nodes
  double max_power_mw = 0.0;  // max over non-sink nodes

  std::uint64_t generated = 0;  // records inside the measurement window
  std::uint64_t delivered = 0;
  std::uint64_t duplicates_at_app = 0;
  std::uint64_t overflow_dropped = 0;
  double yield_pct = 0.0;

  std::uint64_t nacks_sent = 0;
  std::uint64_t data_tx_attempts = 0;
  std::uint64_t frames_sent = 0;
  Mac::UnicastStats unicast;  // summed over all nodes
  std::map<FrameKind, Channel::FateCounters> fates;

  double latency_p50_s = 0.0, latency_p90_s = 0.0, latency_p99_s = 0.0;

  // Network-level breakdown: per phase id, mean over non-sink nodes of the
  // per-node phase power, window-clipped.
  std::map<PhaseId, ComponentPower> breakdown;
  std::map<PhaseId, SimTime> phase_window;  // summed over non-sink nodes

  bool time_partition_ok = true;
  double max_phase_energy_residual_uj = 0.0;
  bool conservation_ok = true;
  std::vector<std::string> warnings;
};

// One fully wired simulation run.
class Network {
 public:
  Network(const ScenarioConfig& cfg, std::uint64_t seed, bool check_mode)
      : cfg_(cfg), seed_(seed), check_(check_mode),
        topo_(load_topology(cfg.topology)), channel_(sim_, topo_, seed) {
    sim_.set_events_per_second_cap(cfg_.events_per_second_cap);
    build();
  }

  Simulator& sim() { return sim_; }
  const Topology& topology() const { return topo_; }
  Router& router(NodeId n) { return *nodes_.at(n)->router; }
  Mac& mac(NodeId n) { return *nodes_.at(n)->mac; }
  PhaseController& controller(NodeId n) { return *nodes_.at(n)->ctrl; }
  NodeLedger& ledger(NodeId n) { return nodes_.at(n)->ledger; }

  RunResult run() {
    for (auto& [id, n] : nodes_) n->ctrl->start();
    if (check_) schedule_audit();
    RunStats stats = sim_.run_until(cfg_.run_duration);
    for (auto& [id, n] : nodes_) n->ledger.finalize(cfg_.run_duration);
    return collect(stats);
  }

 private:
  struct NodeCtx {
    Rng rng;
    NodeLedger ledger;
    std::unique_ptr<Mac> mac;
    std::unique_ptr<Router> router;
    std::unique_ptr<PhaseController> ctrl;
  };

  struct OriginStats {
    std::vector<SimTime> sensed_at;   // by record seq
    std::vector<bool> delivered;
  };

  void build() {
    MacConfig mac_cfg = cfg_.mac;
    if (cfg_.mode == Mode::Pull) mac_cfg.t_w = cfg_.pull.t_w_sleep;
    for (NodeId id : topo_.nodes()) {
      auto n = std::make_unique<NodeCtx>();
      n->rng = Rng(seed_, id);
      n->ledger.set_window(cfg_.stats_from, cfg_.stats_to);
      bool is_sink = id == kSink;
      n->mac = std::make_unique<Mac>(sim_, channel_, n->ledger, n->rng,
                                     mac_cfg, id, is_sink);
      n->router = std::make_unique<Router>(sim_, *n->mac, n->rng,
                                           cfg_.routing, id, is_sink);
      n->ctrl = std::make_unique<PhaseController>(
          sim_, *n->mac, *n->router, n->ledger, n->rng, id, cfg_.mode,
          cfg_.pull, cfg_.routing, is_sink ? 0 : cfg_.sampling_interval);
      wire(id, *n);
      nodes_.emplace(id, std::move(n));
    }
    channel_.set_handlers(
        [this](NodeId d) { return nodes_.at(d)->mac->listen_since(); },
        [this](NodeId d, const Frame& f) { nodes_.at(d)->mac->on_frame(f); });
  }

  void wire(NodeId id, NodeCtx& n) {
    Router* router = n.router.get();
    PhaseController* ctrl = n.ctrl.get();
    n.mac->on_data = [router](const Frame& f) { return router->handle_data(f); };
    n.mac->on_beacon = [router](const Frame& f) { router->handle_beacon(f); };
    n.mac->local_cost = [router] { return router->own_cost(); };
    n.mac->on_peer_cost = [router](NodeId peer, double cost) {
      router->update_peer_cost(peer, cost);
    };
    n.mac->local_phase = [ctrl] { return ctrl->phase(); };
    n.mac->on_peer_phase = [ctrl](const Phase& p) { ctrl->maybe_adopt(p); };
    n.mac->on_strobe_heard = [router](NodeId src, SimTime listen_start,
                                      bool broadcast) {
      router->note_strobe(src, listen_start, broadcast);
    };
    router->current_phase = [ctrl] { return ctrl->phase(); };
    router->can_transmit = [ctrl] { return ctrl->can_transmit(); };
    router->on_phase_beacon = [ctrl](const Frame& f) {
      ctrl->handle_phase_beacon(f);
    };
    router->on_origin_acked = [ctrl](const DataPacket& p) {
      ctrl->on_origin_acked(p);
    };
    router->on_feed = [ctrl] { ctrl->on_feed(); };
    router->on_parent_acquired = [ctrl] { ctrl->on_parent_acquired(); };
    if (id == kSink) {
      router->on_sink_deliver = [this](const DataBody& d) { on_deliver(d); };
      router->on_sink_duplicate = [this](const DataBody&) { ++duplicates_; };
      router->on_sink_data_rx = [ctrl] { ctrl->on_sink_data_rx(); };
    }
    ctrl->on_record_generated = [this](NodeId o, std::uint32_t seq, SimTime t) {
      auto& os = origins_[o];
      if (os.sensed_at.size() <= seq) {
        os.sensed_at.resize(seq + 1, kNoTime);
        os.delivered.resize(seq + 1, false);
      }
      os.sensed_at[seq] = t;
    };
    ctrl->on_overflow = [this](NodeId) { ++overflow_; };
    if (id == kSink)
      ctrl->network_backlog = [this] { return backlog(); };
  }

  void on_deliver(const DataBody& d) {
    auto it = origins_.find(d.origin);
    if (it == origins_.end()) return;
    auto& os = it->second;
    for (std::uint32_t i = 0; i < d.record_count; ++i) {
      std::uint32_t seq = d.first_record_seq + i;
      if (seq < os.delivered.size() && !os.delivered[seq]) {
        os.delivered[seq] = true;
        if (os.sensed_at[seq] != kNoTime)
          latencies_.push_back(sim_.now() - os.sensed_at[seq]);
      }
    }
  }

  std::uint64_t backlog() const {
    std::uint64_t total = 0;
    for (const auto& [id, n] : nodes_) {
      if (id == kSink) continue;
      total += n->ctrl->drainable();
      total += n->ctrl->origin_queue_depth();
      for (const auto& p : n->router->buffer()) total += p.record_count;
    }
    return total;
  }

  void schedule_audit() {
    sim_.schedule(sim_.now() + sec(60), [this] {
      audit();
      schedule_audit();
    });
  }

  // No generated record may vanish: every one is delivered, in flash, in an
  // origin queue, or inside a uniquely identified buffered packet.
  void audit() {
    for (const auto& [id, n] : nodes_) {
      if (n->router->buffer().size() > cfg_.routing.buffer_capacity)
        throw std::logic_error("audit: forwarding buffer over capacity");
    }
    std::uint64_t generated = 0, delivered = 0;
    for (const auto& [o, os] : origins_) {
      for (SimTime t : os.sensed_at)
        if (t != kNoTime) ++generated;
      for (bool b : os.delivered)
        if (b) ++delivered;
    }
    std::uint64_t pending = 0;
    std::set<std::pair<NodeId, std::uint32_t>> seen;
    for (const auto& [id, n] : nodes_) {
      pending += n->ctrl->flash().unpacketized();
      pending += n->ctrl->origin_queue_depth();
      for (const auto& p : n->router->buffer())
        if (seen.insert({p.origin, p.origin_seq}).second)
          pending += p.record_count;
    }
    if (delivered + pending + overflow_ < generated) {
      conservation_ok_ = false;
      std::string detail;
      std::map<NodeId, std::set<std::uint32_t>> held;
      for (const auto& [id, n] : nodes_) {
        for (const auto& p : n->router->buffer())
          for (std::uint32_t i = 0; i < p.record_count; ++i)
            held[p.origin].insert(p.first_record_seq + i);
        for (const auto& p : n->ctrl->origin_queue())
          for (std::uint32_t i = 0; i < p.record_count; ++i)
            held[p.origin].insert(p.first_record_seq + i);
        for (const auto& rec : n->ctrl->flash().records())
          held[id].insert(rec.seq);
      }
      for (const auto& [o, os] : origins_) {
        for (std::size_t s = 0; s < os.sensed_at.size(); ++s) {
          if (os.sensed_at[s] == kNoTime || os.delivered[s]) continue;
          if (held[o].count(std::uint32_t(s))) continue;
          detail += " (" + std::to_string(o) + "," + std::to_string(s) + ")";
        }
      }
      throw std::logic_error(
          "audit: record conservation violated; generated=" +
          std::to_string(generated) + " delivered=" + std::to_string(delivered) +
          " pending=" + std::to_string(pending) +
          " overflow=" + std::to_string(overflow_) + " lost:" + detail);
    }
  }

  RunResult collect(const RunStats& stats) {
    RunResult r;
    r.seed = seed_;
    r.trace_hash = sim_.trace_hash();
    r.events = stats.events_dispatched;
    r.wall_seconds = stats.wall_seconds;
    r.overflow_dropped = overflow_;
    r.duplicates_at_app = duplicates_;
    r.conservation_ok = conservation_ok_;
    r.frames_sent = channel_.frames_sent();
    r.fates = channel_.unicast_fates();

    SimTime window = cfg_.stats_to - cfg_.stats_from;
    std::map<PhaseId, ComponentPower> phase_sum;
    std::map<PhaseId, int> phase_nodes;
    for (const auto& [id, n] : nodes_) {
      NodePowerReport rep;
      rep.id = id;
      rep.components = n->ledger.window_total().power_mw(cfg_.power, window);
      rep.avg_power_mw = rep.components.total();
      std::map<PhaseId, NodeLedger::Bucket> by_id;
      for (const auto& [key, b] : n->ledger.windowed_buckets()) {
        auto& agg = by_id[key.id];
        for (std::size_t i = 0; i < kMacStateCount; ++i)
          agg.radio[i] += b.radio[i];
        agg.mcu_active += b.mcu_active;
        agg.mcu_sleep += b.mcu_sleep;
        agg.flash_written += b.flash_written;
        agg.flash_read += b.flash_read;
      }
      for (const auto& [pid, b] : by_id) {
        SimTime dur = 0;
        for (auto d : b.radio) dur += d;
        rep.phase_durations[pid] = dur;
        rep.per_phase[pid] = b.power_mw(cfg_.power, dur);
      }
      if (!n->ledger.time_partition_ok(cfg_.run_duration))
        r.time_partition_ok = false;
      double res = std::abs(n->ledger.phase_energy_residual_uj(cfg_.power));
      if (res > r.max_phase_energy_residual_uj)
        r.max_phase_energy_residual_uj = res;
      auto oit = origins_.find(id);
      if (oit != origins_.end()) {
        for (std::size_t s = 0; s < oit->second.sensed_at.size(); ++s) {
          if (oit->second.sensed_at[s] == kNoTime) continue;
          if (oit->second.sensed_at[s] < cfg_.yield_cutoff) {
            ++rep.generated;
            if (oit->second.delivered[s]) ++rep.delivered;
          }
        }
      }
      r.generated += rep.generated;
      r.delivered += rep.delivered;
      r.nacks_sent += n->router->nacks_sent();
      r.data_tx_attempts += n->router->data_tx_attempts();
      const auto& us = n->mac->unicast_stats();
      r.unicast.acked += us.acked;
      r.unicast.nacked += us.nacked;
      r.unicast.busy += us.busy;
      r.unicast.noack_no_strobe_ack += us.noack_no_strobe_ack;
      r.unicast.noack_payload += us.noack_payload;
      r.unicast.strobes += us.strobes;
      for (const auto& w : n->ctrl->warnings()) r.warnings.push_back(w);
      if (id != kSink) {
        r.avg_power_mw += rep.avg_power_mw;
        r.max_power_mw = std::max(r.max_power_mw, rep.avg_power_mw);
        for (const auto& [pid, cp] : rep.per_phase) {
          if (rep.phase_durations[pid] == 0) continue;
          phase_sum[pid] += cp;
          ++phase_nodes[pid];
          r.phase_window[pid] += rep.phase_durations[pid];
        }
      }
      r.nodes.push_back(std::move(rep));
    }
    std::size_t non_sink = nodes_.size() - 1;
    if (non_sink > 0) r.avg_power_mw /= double(non_sink);
    for (auto& [pid, cp] : phase_sum) {
      ComponentPower avg = cp;
      double k = double(phase_nodes[pid]);
      avg.mcu /= k; avg.radio_idle /= k; avg.radio_tx /= k; avg.flash /= k;
      r.breakdown[pid] = avg;
    }
    r.yield_pct = r.generated == 0
                      ? 100.0
                      : 100.0 * double(r.delivered) / double(r.generated);
    std::sort(latencies_.begin(), latencies_.end());
    auto pct = [this](double q) {
      if (latencies_.empty()) return 0.0;
      std::size_t i = std::size_t(q * double(latencies_.size() - 1) + 0.5);
      return to_seconds(latencies_[i]);
    };
    r.latency_p50_s = pct(0.50);
    r.latency_p90_s = pct(0.90);
    r.latency_p99_s = pct(0.99);
    return r;
  }

  ScenarioConfig cfg_;
  std::uint64_t seed_;
  bool check_;
  Simulator sim_;
  Topology topo_;
  Channel channel_;
  std::map<NodeId, std::unique_ptr<NodeCtx>> nodes_;
  std::map<NodeId, OriginStats> origins_;
  std::vector<SimTime> latencies_;
  std::uint64_t duplicates_ = 0;
  std::uint64_t overflow_ = 0;
  bool conservation_ok_ = true;
};

}  // namespace wsn
