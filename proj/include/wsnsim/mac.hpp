#pragma once

#include <algorithm>
#include <deque>
#include <functional>
#include <set>
#include <stdexcept>
#include <utility>

#include "wsnsim/channel.hpp"
#include "wsnsim/energy.hpp"
#include "wsnsim/frame.hpp"
#include "wsnsim/kernel.hpp"
#include "wsnsim/rng.hpp"

namespace wsn {

struct MacConfig {
  SimTime t_w = msec(500);        // wake-up interval (runtime switchable)
  SimTime t_cca = msec(10);       // channel-check listen duration
  SimTime t_strobe = msec(1);     // strobe / strobe-ack air time
  SimTime t_gap = msec(1);        // strobe-ack listen window
  SimTime t_data_ack = msec(1);   // data ack/nack air time
  SimTime backoff_base = msec(50);
  SimTime backoff_max = sec(2);
  std::uint64_t bit_rate_bps = 250000;

  SimTime air_time(std::uint16_t length_bytes) const {
    return SimTime(length_bytes) * 8ull * 1000000ull / bit_rate_bps;
  }
};

enum class SendResult { Acked, Nacked, NackedDup, NoAck, ChannelBusy };

enum class RxDecision { Ack, Nack, NackDup };

// X-MAC style low-power-listening MAC: periodic channel checks, strobed
// preambles with early acknowledgment for unicast, strobe/payload
// alternation for broadcast. An always-on variant serves the sink.
class Mac {
 public:
  using SendCallback = std::function<void(SendResult)>;

  Mac(Simulator& sim, Channel& channel, NodeLedger& ledger, Rng& rng,
      const MacConfig& cfg, NodeId self, bool always_on)
      : sim_(sim), channel_(channel), ledger_(ledger), rng_(rng), cfg_(cfg),
        self_(self), always_on_(always_on), interval_(cfg.t_w) {
    if (cfg_.t_cca < cfg_.t_strobe + cfg_.t_gap)
      throw std::invalid_argument("mac: t_cca too short to catch a strobe");
    if (interval_ <= cfg_.t_cca)
      throw std::invalid_argument("mac: t_w must exceed t_cca");
  }

  // Upper-layer hooks.
  std::function<RxDecision(const Frame&)> on_data;
  std::function<void(const Frame&)> on_beacon;
  std::function<double()> local_cost;                 // stamped on data acks
  std::function<Phase()> local_phase;                 // stamped on data acks
  std::function<void(NodeId, double)> on_peer_cost;   // cost seen in an ack
  std::function<void(const Phase&)> on_peer_phase;    // phase seen in an ack
  // Any decoded strobe, with the start of the current continuous listening
  // span (gap samples are only valid within one span) and whether it came
  // from a broadcast cover (different strobe cadence).
  std::function<void(NodeId, SimTime, bool)> on_strobe_heard;

  void start(Phase initial_phase) {
    ledger_.start(sim_.now(), initial_phase, always_on_);
    state_ = base_state();
    listen_since_ = always_on_ ? sim_.now() : kNoTime;
    if (!always_on_) {
      SimTime first = sim_.now() + rng_.uniform_time(1, interval_);
      check_timer_ = sim_.schedule(first, [this] { on_check_timer(); });
    }
  }

  NodeId id() const { return self_; }
  const MacConfig& config() const { return cfg_; }
  MacState state() const { return state_; }
  SimTime wakeup_interval() const { return interval_; }
  bool idle() const { return state_ == base_state() && !in_request_; }

  SimTime listen_since() const { return listen_since_; }

  void set_wakeup_interval(SimTime interval) {
    if (interval <= cfg_.t_cca)
      throw std::invalid_argument("mac: wake-up interval must exceed t_cca");
    if (always_on_ || interval == interval_) {
      interval_ = interval;
      return;
    }
    interval_ = interval;
    sim_.cancel(check_timer_);
    SimTime next = last_check_ == kNoTime ? sim_.now() + interval_
                                          : last_check_ + interval_;
    if (next < sim_.now()) next = sim_.now();
    check_timer_ = sim_.schedule(next, [this] { on_check_timer(); });
  }

  void send_unicast(NodeId dst, const Frame& payload, SendCallback cb) {
    queue_.push_back(Request{RequestType::Unicast, dst, payload, 0,
                             std::move(cb), {}});
    try_start();
  }

  // Streams the next payload to a receiver that just acked one: after an
  // acked exchange both radios are still awake, so no strobe train is
  // needed. The receiver holds the rendezvous open only briefly; a NoAck
  // here means it left, and the caller falls back to a normal unicast.
  void send_followup(NodeId dst, const Frame& payload, SendCallback cb) {
    queue_.push_front(Request{RequestType::Followup, dst, payload, 0,
                              std::move(cb), {}});
    try_start();
  }

  // cover == 0 sends the payload once, without a strobe train: an
  // opportunistic broadcast only already-listening radios will catch.
  void broadcast(const Frame& payload, SimTime cover,
                 std::function<void()> done = {}) {
    queue_.push_back(Request{RequestType::Broadcast, kBroadcast, payload,
                             cover, {}, std::move(done)});
    try_start();
  }

  // Channel delivery entry point.
  void on_frame(const Frame& f) {
    switch (f.kind) {
      case FrameKind::Strobe: handle_strobe(f); break;
      case FrameKind::StrobeAck: handle_strobe_ack(f); break;
      case FrameKind::Data: handle_data(f); break;
      case FrameKind::DataAck:
      case FrameKind::DataNack: handle_data_ack(f); break;
      case FrameKind::Beacon: handle_beacon(f); break;
    }
  }

  std::uint64_t channel_checks() const { return checks_done_; }

  struct UnicastStats {
    std::uint64_t acked = 0, nacked = 0, busy = 0;
    std::uint64_t noack_no_strobe_ack = 0;  // never heard a strobe ack
    std::uint64_t noack_payload = 0;        // payload sent, data ack missing
    std::uint64_t strobes = 0;
  };
  const UnicastStats& unicast_stats() const { return ustats_; }

  // Whether the most recent unicast attempt got a strobe ack: a NoAck
  // without one means the receiver never woke (deaf/congested), which says
  // nothing about link quality.
  bool last_strobe_acked() const { return last_strobe_acked_; }

 private:
  enum class RequestType { Unicast, Followup, Broadcast };
  struct Request {
    RequestType type;
    NodeId dst;
    Frame payload;
    SimTime cover;
    SendCallback cb;
    std::function<void()> done;
  };

  MacState base_state() const {
    return always_on_ ? MacState::RxActive : MacState::RadioOff;
  }

  // Busy now, or recently enough that this instant may be the gap of an
  // ongoing strobe train. A plain instantaneous sample reads idle inside
  // the gaps and lets concurrent trains pile onto each other.
  bool channel_active() const {
    return channel_.busy_at(self_) ||
           channel_.last_audible_end(self_) + cfg_.t_strobe + cfg_.t_gap >
               sim_.now();
  }

  void set_state(MacState s) {
    if (s == state_) return;
    bool was_listening = is_listening(state_);
    state_ = s;
    if (is_listening(s)) {
      if (!was_listening) listen_since_ = sim_.now();
    } else {
      listen_since_ = kNoTime;
    }
    ledger_.set_radio_state(sim_.now(), s);
  }

  // ---- periodic channel checks -------------------------------------

  void on_check_timer() {
    last_check_ = sim_.now();
    check_timer_ = sim_.schedule(last_check_ + interval_,
                                 [this] { on_check_timer(); });
    if (state_ != MacState::RadioOff) {
      static const bool on = std::getenv("WSNSIM_TRACE2") != nullptr;
      if (on)
        std::fprintf(stderr, "%.6f n%u mac skip-check state=%d\n",
                     to_seconds(sim_.now()), self_, int(state_));
      return;  // busy, skip this check
    }
    ++checks_done_;
    set_state(MacState::ChannelCheck);
    check_end_ = sim_.schedule(sim_.now() + cfg_.t_cca,
                               [this] { on_check_end(); });
  }

  void on_check_end() {
    // A decodable strobe would have been handled during the check; whatever
    // is still on the air is not for this node. Sleeping costs at most one
    // retry: a sender camps on the busy channel and then strobes for a full
    // wake-up interval, which covers the next check here.
    set_state(MacState::RadioOff);
    try_start();
  }

  void end_rx(bool resume) {
    sim_.cancel(rx_timeout_);
    rx_peer_ = kNoNode;
    expect_payload_ = false;
    expect_broadcast_ = false;
    if (!resume) return;
    // Serve loop: several senders may be camped on the channel waiting for
    // this node. An immediate extra check catches the next strobe right
    // away instead of making the queue wait out another wake-up interval.
    if (!always_on_ && queue_.empty() && !in_request_ && channel_active()) {
      set_state(MacState::ChannelCheck);
      check_end_ = sim_.schedule(sim_.now() + cfg_.t_cca,
                                 [this] { on_check_end(); });
      return;
    }
    if (enter_hot_rx()) return;
    set_state(base_state());
    try_start();
  }

  // Adaptive duty cycle: a node that just accepted a data payload is very
  // likely the rendezvous point for more senders (it is a fan-in node of
  // the tree). Staying in open receive for one wake-up interval lets their
  // strobes ack within milliseconds instead of each burning a full train,
  // which is what keeps the channel alive under drain bursts.
  bool enter_hot_rx() {
    if (always_on_ || in_request_ || !queue_.empty() ||
        sim_.now() >= rx_hot_until_)
      return false;
    set_state(MacState::RxActive);
    arm_hot_timer();
    return true;
  }

  bool hot_open() const {
    return state_ == MacState::RxActive && !in_request_ && !expect_payload_ &&
           !expect_broadcast_ && sim_.now() < rx_hot_until_;
  }

  void arm_hot_timer() {
    sim_.cancel(hot_timer_);
    hot_timer_ = sim_.schedule(rx_hot_until_, [this] {
      if (state_ != MacState::RxActive || in_request_ || expect_payload_ ||
          expect_broadcast_)
        return;  // something else took over the radio
      if (sim_.now() < rx_hot_until_) {
        arm_hot_timer();  // extended meanwhile
        return;
      }
      set_state(MacState::RadioOff);
      try_start();
    });
  }

  // ---- transmit side ------------------------------------------------

  void try_start() {
    if (in_request_ || state_ != base_state() || queue_.empty()) return;
    in_request_ = true;
    current_ = std::move(queue_.front());
    queue_.pop_front();
    if (current_.type == RequestType::Unicast) begin_unicast();
    else if (current_.type == RequestType::Followup) begin_followup();
    else begin_broadcast();
  }

  void begin_followup() {
    last_strobe_acked_ = false;
    attempt_start_ = sim_.now();
    // Short turnaround gap so the receiver can switch from its ack
    // transmission back to receive.
    set_state(MacState::WaitStrobeAck);
    gap_timer_ = sim_.schedule(sim_.now() + cfg_.t_gap, [this] {
      payload_retries_ = 2;
      tx_payload();
    });
  }

  void begin_unicast() {
    last_strobe_acked_ = false;
    sent_any_strobe_ = false;
    attempt_start_ = sim_.now();
    busy_wait_deadline_ = sim_.now() + 4 * interval_;
    wait_for_channel();
  }

  // Listen-before-talk with patience: camp on the busy channel and start
  // the train the moment it clears. Aborting instead leaves the channel
  // idle for a full blind backoff after every exchange.
  void wait_for_channel() {
    if (!channel_active()) {
      // Contention slot: every camper sees the channel clear within the
      // same poll granularity, so seizing it immediately makes their
      // trains collide. Draw a random slot, then look again.
      if (!slotted_) {
        slotted_ = true;
        set_state(MacState::WaitStrobeAck);
        gap_timer_ = sim_.schedule(
            sim_.now() + rng_.uniform_time(0, 16 * cfg_.t_strobe),
            [this] { wait_for_channel(); });
        return;
      }
      slotted_ = false;
      strobe_deadline_ = sim_.now() + interval_ + cfg_.t_cca;
      send_strobe();
      return;
    }
    slotted_ = false;
    if (sim_.now() >= busy_wait_deadline_) {
      ++ustats_.busy;
      finish_unicast(SendResult::ChannelBusy);
      return;
    }
    set_state(MacState::WaitStrobeAck);
    gap_timer_ = sim_.schedule(
        sim_.now() + rng_.uniform_time(cfg_.t_strobe, 3 * cfg_.t_strobe),
        [this] { wait_for_channel(); });
  }

  void mtrace(const char* what) {
    static const bool on = std::getenv("WSNSIM_TRACE2") != nullptr;
    if (on)
      std::fprintf(stderr, "%.6f n%u mac %s dst=%u began=%.6f\n",
                   to_seconds(sim_.now()), self_, what, current_.dst,
                   to_seconds(attempt_start_));
  }

  void send_strobe() {
    if (sim_.now() + cfg_.t_strobe > strobe_deadline_) {
      if (!sent_any_strobe_) {
        // Spent the whole attempt deferring to other traffic.
        ++ustats_.busy;
        finish_unicast(SendResult::ChannelBusy);
        return;
      }
      ++ustats_.noack_no_strobe_ack;
      mtrace("uc-nostrobeack");
      finish_unicast(SendResult::NoAck);
      return;
    }
    if (sent_any_strobe_ ? channel_.busy_at(self_) : channel_active()) {
      // Defer instead of strobing over ongoing traffic; the random wait
      // also breaks lockstep between concurrent strobe trains. Before the
      // first strobe the stricter gap-bridging test applies: mid-train,
      // only an actual transmission should pause our own train.
      set_state(MacState::WaitStrobeAck);
      gap_timer_ = sim_.schedule(
          sim_.now() + rng_.uniform_time(cfg_.t_strobe, 3 * cfg_.t_strobe),
          [this] { send_strobe(); });
      return;
    }
    set_state(MacState::TxStrobe);
    Frame s;
    s.kind = FrameKind::Strobe;
    s.src = self_;
    s.dst = current_.dst;
    s.length = 8;
    ++ustats_.strobes;
    sent_any_strobe_ = true;
    channel_.start_tx(self_, s, cfg_.t_strobe, [this] {
      set_state(MacState::WaitStrobeAck);
      // Jittered gap: two concurrent trains that happen to start in phase
      // would otherwise collide strobe-for-strobe over a whole interval.
      gap_timer_ = sim_.schedule(
          sim_.now() + cfg_.t_gap + rng_.uniform_time(0, cfg_.t_gap),
          [this] { send_strobe(); });
    });
  }

  void handle_strobe_ack(const Frame& f) {
    if (state_ != MacState::WaitStrobeAck || f.src != current_.dst) return;
    if (f.dst != self_) {
      // Our destination just acknowledged a competitor we may not be able
      // to hear (hidden terminal). Pause the train for one data exchange;
      // strobing on would only garble their payload and waste our deadline.
      if (in_request_ && current_.type != RequestType::Broadcast &&
          sent_any_strobe_) {
        sim_.cancel(gap_timer_);
        SimTime pause =
            2 * cfg_.t_gap + cfg_.air_time(128) + cfg_.t_data_ack + msec(1);
        strobe_deadline_ += pause;
        gap_timer_ =
            sim_.schedule(sim_.now() + pause, [this] { send_strobe(); });
      }
      return;
    }
    sim_.cancel(gap_timer_);
    last_strobe_acked_ = true;
    payload_retries_ = 2;
    tx_payload();
  }

  // Payload with in-rendezvous retries: a lost payload or ack costs a few
  // milliseconds to repair here, versus a whole new strobe train later. A
  // retry after a lost ack is acknowledged as an in-buffer duplicate, so it
  // cannot fork a second copy.
  void tx_payload() {
    set_state(MacState::TxPayload);
    channel_.start_tx(self_, current_.payload,
                      cfg_.air_time(current_.payload.length), [this] {
                        set_state(MacState::WaitPayloadAck);
                        wait_timer_ = sim_.schedule(
                            sim_.now() + cfg_.t_gap + cfg_.t_data_ack, [this] {
                              if (payload_retries_ > 0) {
                                --payload_retries_;
                                tx_payload();
                                return;
                              }
                              ++ustats_.noack_payload;
                              finish_unicast(SendResult::NoAck);
                            });
                      });
  }

  void handle_data_ack(const Frame& f) {
    if (state_ != MacState::WaitPayloadAck || f.dst != self_ ||
        f.src != current_.dst)
      return;
    sim_.cancel(wait_timer_);
    if (on_peer_cost) on_peer_cost(f.src, f.beacon.path_cost);
    // Acks carry the responder's phase: a node that missed a phase flood
    // resynchronizes on its next data exchange with an up-to-date peer.
    if (on_peer_phase) on_peer_phase(f.beacon.phase);
    if (f.kind == FrameKind::DataAck) ++ustats_.acked;
    else ++ustats_.nacked;
    SendResult r = SendResult::Acked;
    if (f.kind == FrameKind::DataNack)
      r = f.beacon.dup_nack ? SendResult::NackedDup : SendResult::Nacked;
    finish_unicast(r);
  }

  void finish_unicast(SendResult r) {
    set_state(base_state());
    in_request_ = false;
    auto cb = std::move(current_.cb);
    if (cb) cb(r);
    try_start();
  }

  void begin_broadcast() {
    if (current_.cover == 0) {
      single_broadcast();
      return;
    }
    bcast_end_ = sim_.now() + current_.cover;
    // Deferrals extend the cover to preserve its promised on-air time, but
    // under congestion unbounded extension lets concurrent covers stretch
    // indefinitely and monopolize the channel.
    bcast_cap_ = sim_.now() + 2 * current_.cover;
    bcast_cycle();
  }

  void single_broadcast() {
    if (channel_active()) {
      set_state(base_state());
      SimTime pause = rng_.uniform_time(msec(1), msec(8));
      wait_timer_ =
          sim_.schedule(sim_.now() + pause, [this] { single_broadcast(); });
      return;
    }
    set_state(MacState::TxPayload);
    channel_.start_tx(self_, current_.payload,
                      cfg_.air_time(current_.payload.length),
                      [this] { finish_broadcast(); });
  }

  void bcast_cycle() {
    if (sim_.now() + cfg_.t_strobe >= bcast_end_) {
      finish_broadcast();
      return;
    }
    if (channel_active()) {
      // Interleave with a concurrent flood instead of jamming it. The
      // pause extends the deadline: cover promises on-air time, and a
      // deferred train must not shrink below the slowest check interval.
      set_state(base_state());
      SimTime pause = rng_.uniform_time(msec(1), msec(8));
      bcast_end_ = std::min(bcast_end_ + pause, bcast_cap_);
      wait_timer_ =
          sim_.schedule(sim_.now() + pause, [this] { bcast_cycle(); });
      return;
    }
    set_state(MacState::TxStrobe);
    Frame s;
    s.kind = FrameKind::Strobe;
    s.src = self_;
    s.dst = kBroadcast;
    s.length = 8;
    s.broadcast_strobe = true;
    channel_.start_tx(self_, s, cfg_.t_strobe, [this] {
      set_state(MacState::TxPayload);
      channel_.start_tx(self_, current_.payload,
                        cfg_.air_time(current_.payload.length),
                        [this] { bcast_cycle(); });
    });
  }

  void finish_broadcast() {
    set_state(base_state());
    in_request_ = false;
    auto done = std::move(current_.done);
    if (done) done();
    try_start();
  }

  // ---- receive side ---------------------------------------------------

  void handle_strobe(const Frame& f) {
    if (f.broadcast_strobe) {
      if (state_ == MacState::ChannelCheck) {
        sim_.cancel(check_end_);
        set_state(MacState::RxActive);
        expect_broadcast_ = true;
      } else if (!(state_ == MacState::RxActive && expect_broadcast_)) {
        return;
      }
      if (on_strobe_heard) on_strobe_heard(f.src, listen_since_, true);
      // (Re)arm: wait long enough for the payload half of the cycle.
      sim_.cancel(rx_timeout_);
      rx_timeout_ = sim_.schedule(
          sim_.now() + cfg_.t_strobe + cfg_.air_time(128) + msec(5),
          [this] { end_rx(true); });
      return;
    }
    // Every decoded strobe is a passive link-quality sample for the
    // upper layer (decode gaps within one train reveal the loss rate).
    if (on_strobe_heard) on_strobe_heard(f.src, listen_since_, false);
    if (f.dst == self_) {
      if (state_ == MacState::ChannelCheck) {
        sim_.cancel(check_end_);
        send_strobe_ack(f.src);
      } else if (state_ == MacState::WaitStrobeAck && in_request_ &&
                 current_.type == RequestType::Unicast) {
        // Heard in a gap of our own strobe train: the peer wants to send to
        // us right now. Yield the attempt and serve them, otherwise two
        // nodes strobing at each other stay mutually deaf for a full
        // wake-up interval and retry in lockstep.
        sim_.cancel(gap_timer_);
        in_request_ = false;
        auto cb = std::move(current_.cb);
        send_strobe_ack(f.src);
        if (cb) cb(SendResult::ChannelBusy);
      } else if (state_ == MacState::RxActive &&
                 (always_on_ || hot_open()) && !expect_payload_ &&
                 !expect_broadcast_) {
        sim_.cancel(rx_timeout_);
        sim_.cancel(hot_timer_);
        send_strobe_ack(f.src);
      } else if (state_ == MacState::RxActive && expect_payload_ &&
                 rx_peer_ == f.src) {
        sim_.cancel(rx_timeout_);
        send_strobe_ack(f.src);  // previous strobe-ack was lost
      }
      return;
    }
    // Addressed elsewhere: overhearing avoidance, back to sleep. A train
    // queued up behind the overheard one still gets through on its next
    // attempt, because its sender camps on the channel and then strobes
    // across a full wake-up interval.
    if (state_ == MacState::ChannelCheck) {
      sim_.cancel(check_end_);
      set_state(MacState::RadioOff);
      try_start();
    }
  }

  void send_strobe_ack(NodeId peer) {
    set_state(MacState::TxAck);
    Frame a;
    a.kind = FrameKind::StrobeAck;
    a.src = self_;
    a.dst = peer;
    a.length = 8;
    channel_.start_tx(self_, a, cfg_.t_strobe, [this, peer] {
      set_state(MacState::RxActive);
      rx_peer_ = peer;
      expect_payload_ = true;
      // Long enough for the payload plus a couple of backed-off retries;
      // any later retry re-runs the full strobe train instead.
      SimTime window = std::min<SimTime>(2 * interval_, msec(100));
      rx_timeout_ = sim_.schedule(sim_.now() + window, [this] { end_rx(true); });
    });
  }

  void handle_data(const Frame& f) {
    if (f.dst != self_) return;
    bool receptive =
        (state_ == MacState::RxActive && expect_payload_ && rx_peer_ == f.src) ||
        (always_on_ && state_ == MacState::RxActive);
    if (!receptive) return;
    end_rx(false);
    RxDecision d = on_data ? on_data(f) : RxDecision::Ack;
    set_state(MacState::TxAck);
    Frame a;
    a.kind = d == RxDecision::Ack ? FrameKind::DataAck : FrameKind::DataNack;
    a.src = self_;
    a.dst = f.src;
    a.length = 8;
    a.beacon.path_cost = local_cost ? local_cost() : kInfiniteCost;
    a.beacon.phase = local_phase ? local_phase() : Phase{};
    a.beacon.dup_nack = d == RxDecision::NackDup;
    bool hold = d == RxDecision::Ack && !always_on_;
    if (hold) {
      // Open receive pays off only under sustained fan-in (a drain burst);
      // a second reception within one interval is the trigger. Sporadic
      // traffic keeps the normal duty cycle.
      if (sim_.now() - last_data_rx_ < interval_)
        rx_hot_until_ = sim_.now() + interval_;
      last_data_rx_ = sim_.now();
    }
    channel_.start_tx(self_, a, cfg_.t_data_ack, [this, hold, peer = f.src] {
      if (hold) {
        // Keep the rendezvous open: the sender may stream its next queued
        // packet immediately, without a new strobe train.
        set_state(MacState::RxActive);
        rx_peer_ = peer;
        expect_payload_ = true;
        rx_timeout_ = sim_.schedule(
            sim_.now() + 3 * (2 * cfg_.t_gap + cfg_.air_time(128) +
                              cfg_.t_data_ack) + msec(2),
            [this] { end_rx(true); });
        return;
      }
      set_state(base_state());
      try_start();
    });
  }

  void handle_beacon(const Frame& f) {
    bool was_waiting =
        state_ == MacState::RxActive && (expect_broadcast_ || !expect_payload_);
    bool in_check = state_ == MacState::ChannelCheck;
    if (!always_on_ && !was_waiting && !in_check) return;
    if (in_check) sim_.cancel(check_end_);
    if (!always_on_) end_rx(false);
    bool fresh = beacon_dedup_.insert({f.beacon.src, f.beacon.seq}).second;
    if (beacon_dedup_.size() > 4096) beacon_dedup_.clear();
    if (fresh && on_beacon) on_beacon(f);
    if (!always_on_ && state_ != base_state() && !in_request_ &&
        !is_transmitting(state_)) {
      if (enter_hot_rx()) return;
      set_state(MacState::RadioOff);
    }
    try_start();
  }

  Simulator& sim_;
  Channel& channel_;
  NodeLedger& ledger_;
  Rng& rng_;
  MacConfig cfg_;
  NodeId self_;
  bool always_on_;

  SimTime interval_;
  MacState state_ = MacState::RadioOff;
  SimTime listen_since_ = kNoTime;
  SimTime last_check_ = kNoTime;
  std::uint64_t checks_done_ = 0;

  EventHandle check_timer_, check_end_, gap_timer_, wait_timer_, rx_timeout_,
      hot_timer_;
  SimTime rx_hot_until_ = 0;
  SimTime last_data_rx_ = kNoTime;

  std::deque<Request> queue_;
  Request current_;
  bool in_request_ = false;
  bool last_strobe_acked_ = false;
  int payload_retries_ = 0;
  bool sent_any_strobe_ = false;
  SimTime busy_wait_deadline_ = 0;
  bool slotted_ = false;
  SimTime strobe_deadline_ = 0;
  SimTime attempt_start_ = 0;
  SimTime bcast_end_ = 0;
  SimTime bcast_cap_ = 0;

  UnicastStats ustats_;

  NodeId rx_peer_ = kNoNode;
  bool expect_payload_ = false;
  bool expect_broadcast_ = false;

  std::set<std::pair<NodeId, std::uint32_t>> beacon_dedup_;
};

}  // namespace wsn
