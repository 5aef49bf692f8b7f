#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "wsnsim/flash.hpp"
#include "wsnsim/frame.hpp"
#include "wsnsim/kernel.hpp"
#include "wsnsim/mac.hpp"
#include "wsnsim/routing.hpp"

namespace wsn {

enum class Mode { Push, Pull };

struct PullConfig {
  SimTime t_pull = sec(600);
  SimTime t_w_sleep = sec(4);
  SimTime t_w_collect = msec(500);
  SimTime quiescence_timeout = sec(30);
  SimTime min_collection = sec(60);
  SimTime max_collection = sec(900);
  std::uint64_t flash_capacity = 1048576;
  std::uint64_t record_size = 25;
};

inline constexpr SimTime kMcuSamplePulse = msec(2);
inline constexpr std::uint16_t kRecordsPerPacket = 4;
// A node skips its own phase-flood rebroadcast after hearing this many
// distinct full-cover floods for the current epoch.
inline constexpr std::size_t kFloodSuppressCount = 3;

// The sleep/collection phase machine: sink-driven phase control carried in
// beacon phase IDs, dual wake-up interval switching, flash-backed backlog,
// and the push baseline (phase pinned to Collection, no pull machinery).
class PhaseController {
 public:
  PhaseController(Simulator& sim, Mac& mac, Router& router, NodeLedger& ledger,
                  Rng& rng, NodeId self, Mode mode, const PullConfig& pcfg,
                  const RoutingConfig& rcfg, SimTime sampling_interval)
      : sim_(sim), mac_(mac), router_(router), ledger_(ledger), rng_(rng),
        self_(self), mode_(mode), pcfg_(pcfg), rcfg_(rcfg),
        sampling_(sampling_interval),
        flash_(pcfg.flash_capacity, pcfg.record_size) {
    phase_ = mode_ == Mode::Push ? Phase{PhaseId::Collection, 0}
                                 : Phase{PhaseId::Sleep, 0};
  }

  // Stats hooks (network wiring).
  std::function<void(NodeId, std::uint32_t, SimTime)> on_record_generated;
  std::function<void(NodeId)> on_overflow;
  std::function<std::uint64_t()> network_backlog;  // sink-side warning only

  Phase phase() const { return phase_; }
  Mode mode() const { return mode_; }
  const FlashLog& flash() const { return flash_; }
  std::uint32_t records_generated() const { return next_record_seq_; }
  // Records this node still owes the current collection (excludes samples
  // taken during the collection, which wait for the next cycle).
  std::uint64_t drainable() const { return drain_budget_; }
  std::size_t origin_queue_depth() const { return origin_queue_.size(); }
  const std::deque<DataPacket>& origin_queue() const { return origin_queue_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  bool can_transmit() const {
    return mode_ == Mode::Push || phase_.id == PhaseId::Collection;
  }

  void start() {
    mac_.start(phase_);
    bool is_sink = self_ == kSink;
    if (mode_ == Mode::Push) {
      if (rcfg_.beacon_period_push > 0)
        router_.start_beaconing(rcfg_.beacon_period_push, mac_.config().t_w);
    } else if (is_sink) {
      sim_.schedule(pcfg_.t_pull, [this] { sink_start_collection(); });
    }
    if (!is_sink && sampling_ > 0) {
      SimTime first = sim_.now() + rng_.uniform_time(1, sampling_);
      sample_timer_ = sim_.schedule(first, [this] { sensor_sample(); });
    }
  }

  // ---- sampling ---------------------------------------------------------

  void sensor_sample() {
    sample_timer_ = sim_.schedule(sim_.now() + sampling_,
                                  [this] { sensor_sample(); });
    mcu_pulse(kMcuSamplePulse);
    std::uint32_t seq = next_record_seq_++;
    if (mode_ == Mode::Push) {
      DataPacket p;
      p.origin = self_;
      p.origin_seq = seq;
      p.first_record_seq = seq;
      p.record_count = 1;
      p.payload_size = static_cast<std::uint16_t>(pcfg_.record_size);
      p.generated_at = sim_.now();
      if (on_record_generated) on_record_generated(self_, seq, sim_.now());
      origin_queue_.push_back(p);
      feed_from_queue();
    } else {
      if (flash_.append(FlashRecord{seq, sim_.now()})) {
        ledger_.add_flash(sim_.now(), pcfg_.record_size, 0);
        if (on_record_generated) on_record_generated(self_, seq, sim_.now());
      } else {
        if (on_overflow) on_overflow(self_);
      }
    }
  }

  // ---- router wiring ------------------------------------------------------

  void handle_phase_beacon(const Frame& f) {
    if (mode_ != Mode::Pull || self_ == kSink) return;
    const Phase& p = f.beacon.phase;
    if (p.epoch == phase_.epoch && f.beacon.flood)
      flood_srcs_.insert(f.beacon.src);
    maybe_adopt(p);
  }

  // Newer epochs win regardless of how they were heard (flood, beacon, or
  // a phase-stamped data ack); older ones are stale echoes.
  void maybe_adopt(const Phase& p) {
    if (mode_ != Mode::Pull || self_ == kSink) return;
    if (p.epoch <= phase_.epoch) return;
    adopt(p);
  }

  void on_parent_acquired() { drain_kick(); }

  void on_feed() {
    if (mode_ == Mode::Push) feed_from_queue();
    else drain_kick();
  }

  void on_origin_acked(const DataPacket& p) {
    if (mode_ == Mode::Pull) flash_.erase_front(p.record_count);
  }

  void on_sink_data_rx() { last_data_rx_ = sim_.now(); }

 private:
  // ---- push datapath ----------------------------------------------------

  void feed_from_queue() {
    while (!origin_queue_.empty() && router_.offer(origin_queue_.front()))
      origin_queue_.pop_front();
  }

  // ---- pull node side ----------------------------------------------------

  void adopt(Phase p) {
    set_phase(p);
    ptrace("adopt");
    std::uint32_t epoch = p.epoch;
    if (p.id == PhaseId::Collection) {
      mac_.set_wakeup_interval(pcfg_.t_w_collect);
      // Stale link estimates from the previous collection mislead parent
      // selection after a long sleep; rebuild the tree from the wake-up
      // flood's cost gradient instead.
      router_.reset_route();
      // Upload only the backlog that existed at wake-up. Records sampled
      // while the collection runs wait for the next cycle; otherwise a
      // steady sample trickle would keep refreshing the sink's quiescence
      // timer and every collection would run to max_collection.
      drain_budget_ = flash_.unpacketized();
      // Desynchronize the backlog drain: with every node starting a full
      // buffer at the same instant, first attempts would collide en masse.
      SimTime window = std::min(sec(30), pcfg_.min_collection * 4 / 5);
      drain_after_ = sim_.now() + rng_.uniform_time(sec(1), window);
      sim_.schedule(drain_after_, [this, epoch] {
        if (phase_.epoch == epoch && phase_.id == PhaseId::Collection)
          drain_kick();
      });
      // Periodic beacons go out as single frames: the tree is seeded by the
      // wake-up flood cascade and refreshed by cost-carrying acks, so only
      // already-listening radios need to catch these. Full covers at this
      // period would saturate the channel.
      router_.start_beaconing(rcfg_.beacon_period_collection, 0);
      // Single-rebroadcast flood: relay the wake-up far enough to reach
      // neighbors still checking at the sleep interval. Suppressed when
      // enough distinct floods were already heard for this epoch; the
      // delay must span several cover lengths, otherwise every node fires
      // before suppression can engage and the covers monopolize the
      // channel for the whole collection.
      sim_.schedule(sim_.now() + rng_.uniform_time(pcfg_.t_w_sleep / 2,
                                                   4 * pcfg_.t_w_sleep),
                    [this, epoch] {
                      if (phase_.epoch == epoch &&
                          phase_.id == PhaseId::Collection)
                        rebroadcast_flood(wakeup_cover());
                    });
      sim_.schedule(sim_.now() + pcfg_.max_collection + sec(60),
                    [this, epoch] {
                      if (phase_.epoch == epoch &&
                          phase_.id == PhaseId::Collection)
                        autonomous_sleep();
                    });
      drain_kick();
    } else {
      enter_sleep();
      sim_.schedule(sim_.now() + rng_.uniform_time(0, sec(1)),
                    [this, epoch] {
                      if (phase_.epoch == epoch && phase_.id == PhaseId::Sleep)
                        rebroadcast_flood(collect_cover());
                    });
    }
  }

  void rebroadcast_flood(SimTime cover) {
    if (flood_srcs_.size() >= kFloodSuppressCount) return;
    ptrace("rebroadcast");
    Frame b = router_.make_beacon();
    b.beacon.flood = true;
    mac_.broadcast(b, cover);
  }

  void enter_sleep() {
    mac_.set_wakeup_interval(pcfg_.t_w_sleep);
    router_.stop_beaconing();
  }

  // Lost sleep announcement: stop burning energy at the fast interval.
  void autonomous_sleep() {
    set_phase(Phase{PhaseId::Sleep, phase_.epoch});
    enter_sleep();
  }

  void drain_kick() {
    if (mode_ != Mode::Pull || phase_.id != PhaseId::Collection) return;
    if (sim_.now() < drain_after_) return;
    if (router_.parent() == kNoNode) return;
    while (router_.buffer_space() > 0 && drain_budget_ > 0) {
      std::size_t n = std::min<std::size_t>(
          kRecordsPerPacket,
          std::min<std::size_t>(drain_budget_, flash_.unpacketized()));
      if (n == 0) break;
      drain_budget_ -= n;
      auto recs = flash_.bundle(n);
      ledger_.add_flash(sim_.now(), 0, n * pcfg_.record_size);
      DataPacket p;
      p.origin = self_;
      p.origin_seq = next_packet_seq_++;
      p.first_record_seq = recs.front().seq;
      p.record_count = static_cast<std::uint16_t>(n);
      p.payload_size = static_cast<std::uint16_t>(n * pcfg_.record_size);
      p.generated_at = recs.front().sensed_at;
      router_.offer(p);
    }
  }

  // ---- pull sink side ------------------------------------------------------

  void sink_start_collection() {
    set_phase(Phase{PhaseId::Collection, phase_.epoch + 1});
    collection_started_ = sim_.now();
    last_data_rx_ = sim_.now();
    sim_.schedule(sim_.now() + pcfg_.t_pull, [this] { sink_start_collection(); });
    // One full-cover wake-up burst, then fast single-frame beacons keep
    // carrying the phase ID and the cost-0 anchor to listening radios.
    Frame wake = router_.make_beacon();
    wake.beacon.flood = true;
    mac_.broadcast(wake, wakeup_cover());
    router_.start_beaconing(sec(2), 0);
    quiescence_timer_ =
        sim_.schedule(sim_.now() + sec(5), [this] { sink_check_end(); });
  }

  void sink_check_end() {
    if (phase_.id != PhaseId::Collection) return;
    SimTime elapsed = sim_.now() - collection_started_;
    bool quiesced = elapsed >= pcfg_.min_collection &&
                    sim_.now() - last_data_rx_ >= pcfg_.quiescence_timeout;
    if (elapsed >= pcfg_.max_collection) {
      if (network_backlog && network_backlog() > 0)
        warnings_.push_back("collection hit max_collection at t=" +
                            format_duration(sim_.now()) +
                            " with nonzero backlog");
      sink_end_collection();
    } else if (quiesced) {
      sink_end_collection();
    } else {
      quiescence_timer_ =
          sim_.schedule(sim_.now() + sec(5), [this] { sink_check_end(); });
    }
  }

  void sink_end_collection() {
    router_.stop_beaconing();
    set_phase(Phase{PhaseId::Sleep, phase_.epoch + 1});
    for (int i = 0; i < 3; ++i) {
      sim_.schedule(sim_.now() + SimTime(i) * sec(2), [this] {
        if (phase_.id != PhaseId::Sleep) return;
        Frame b = router_.make_beacon();
        b.beacon.flood = true;
        mac_.broadcast(b, collect_cover());
      });
    }
  }

  // ---- shared -------------------------------------------------------------

  SimTime wakeup_cover() const {
    return pcfg_.t_w_sleep + 2 * mac_.config().t_cca;
  }
  SimTime collect_cover() const {
    return pcfg_.t_w_collect + 2 * mac_.config().t_cca;
  }

  void ptrace(const char* what) const {
    static const bool on = std::getenv("WSNSIM_TRACE") != nullptr;
    if (on)
      std::fprintf(stderr, "%.6f n%u phase %s (id=%d epoch=%u parent=%u)\n",
                   to_seconds(sim_.now()), self_, what, int(phase_.id),
                   phase_.epoch, router_.parent());
  }

  void set_phase(Phase p) {
    if (p.epoch != phase_.epoch) flood_srcs_.clear();
    phase_ = p;
    ledger_.on_phase_change(sim_.now(), p);
  }

  void mcu_pulse(SimTime d) {
    ledger_.mcu_pulse(sim_.now(), d);
    sim_.schedule(sim_.now() + d, [this] { ledger_.update_mcu(sim_.now()); });
  }

  Simulator& sim_;
  Mac& mac_;
  Router& router_;
  NodeLedger& ledger_;
  Rng& rng_;
  NodeId self_;
  Mode mode_;
  PullConfig pcfg_;
  RoutingConfig rcfg_;
  SimTime sampling_;

  Phase phase_;
  FlashLog flash_;
  std::uint32_t next_record_seq_ = 0;
  std::uint32_t next_packet_seq_ = 0;
  std::deque<DataPacket> origin_queue_;  // push: origin never drops own data
  EventHandle sample_timer_, quiescence_timer_;

  std::set<NodeId> flood_srcs_;  // distinct flood sources this epoch
  SimTime drain_after_ = 0;      // per-collection stagger of the first send
  std::size_t drain_budget_ = 0;  // backlog records snapshot at wake-up
  SimTime collection_started_ = 0;
  SimTime last_data_rx_ = 0;
  std::vector<std::string> warnings_;
};

}  // namespace wsn
