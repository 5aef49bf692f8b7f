#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <set>
#include <utility>

#include <cstdio>
#include <cstdlib>

#include "wsnsim/frame.hpp"
#include "wsnsim/kernel.hpp"
#include "wsnsim/mac.hpp"
#include "wsnsim/rng.hpp"

namespace wsn {

struct RoutingConfig {
  SimTime beacon_period_push = sec(30);
  SimTime beacon_period_collection = sec(5);
  std::size_t buffer_capacity = 10;
  double etx_alpha = 0.9;  // weight of the old estimate
};

struct DataPacket {
  NodeId origin = kNoNode;
  NodeId received_from = kNoNode;  // upstream hop, kNoNode for own packets
  std::uint32_t origin_seq = 0;
  std::uint32_t first_record_seq = 0;
  std::uint16_t record_count = 0;
  std::uint16_t payload_size = 0;
  SimTime generated_at = 0;
  SimTime not_before = 0;  // parked until then (duplicate back-pressure)
};

inline constexpr std::uint16_t kDataHeaderBytes = 12;
inline constexpr std::uint16_t kBeaconBytes = 24;

// CTP-like tree collection: beacon-driven parent selection over additive
// ETX, hop-by-hop forwarding with ack-gated deletion and explicit-NACK
// back-pressure.
class Router {
 public:
  struct NeighborEntry {
    double advertised_cost = kInfiniteCost;
    double recv_ratio = 1.0;   // EWMA of beacon reception
    double data_success = -1;  // EWMA of unicast outcomes; <0 until sampled
    double strobe_prr = -1;    // EWMA of decode-gap link estimate
    SimTime last_strobe = kNoTime;
    std::uint32_t last_seq = 0;
    bool seq_valid = false;
    SimTime last_heard = 0;

    // Hybrid estimate. Unicast outcomes dominate once available; before
    // the first exchange the passive strobe estimator replaces the blind
    // optimism of an unmeasured link (it is biased low under congestion,
    // but the relative ordering of links is what selection needs).
    double link_etx() const {
      double r;
      if (data_success >= 0)
        r = data_success;
      else if (strobe_prr >= 0)
        r = strobe_prr;
      else
        r = recv_ratio;
      if (r < 0.05) r = 0.05;
      return std::clamp(1.0 / r, 1.0, 20.0);
    }

    // A decoded strobe n periods after the previous one from the same
    // train means n-1 copies were missed: one passive loss-rate sample.
    // Only valid if this node listened across the whole gap, otherwise
    // its own sleep time would masquerade as link loss.
    void strobe_sample(SimTime now, SimTime listen_start, SimTime period,
                       double weight) {
      if (last_strobe != kNoTime && now > last_strobe &&
          listen_start != kNoTime && listen_start <= last_strobe &&
          now - last_strobe < 25 * period) {
        double expected = double(now - last_strobe) / double(period);
        double s = expected > 1.0 ? 1.0 / expected : 1.0;
        strobe_prr =
            strobe_prr < 0 ? s : (1 - weight) * strobe_prr + weight * s;
      }
      last_strobe = now;
    }

    void data_sample(bool ok) {
      double s = ok ? 1.0 : 0.0;
      data_success = data_success < 0 ? 0.4 + 0.6 * s
                                      : 0.9 * data_success + 0.1 * s;
    }

    // Strobe-deaf trains are ambiguous: the link may be poor or the
    // receiver merely busy. Sampled at low weight so a genuinely bad
    // link still decays while a busy good one recovers on the next ack.
    void data_sample_soft(bool ok) {
      double s = ok ? 1.0 : 0.0;
      data_success = data_success < 0 ? 0.7 + 0.3 * s
                                      : 0.95 * data_success + 0.05 * s;
    }
  };

  Router(Simulator& sim, Mac& mac, Rng& rng, const RoutingConfig& cfg,
         NodeId self, bool is_sink)
      : sim_(sim), mac_(mac), rng_(rng), cfg_(cfg), self_(self),
        is_sink_(is_sink), backoff_cap_(4 * mac.config().backoff_base) {
    if (is_sink_) own_cost_ = 0.0;
  }

  // Wiring, set by the node assembly.
  std::function<Phase()> current_phase;
  std::function<bool()> can_transmit;
  std::function<void(const Frame&)> on_phase_beacon;
  std::function<void(const DataPacket&)> on_origin_acked;
  std::function<void()> on_feed;            // room freed in the buffer
  std::function<void()> on_parent_acquired;
  std::function<void(const DataBody&)> on_sink_deliver;    // first copy
  std::function<void(const DataBody&)> on_sink_duplicate;  // app-level dup
  std::function<void()> on_sink_data_rx;    // quiescence tracking

  NodeId parent() const { return parent_; }
  double own_cost() const { return own_cost_; }
  SimTime beacon_period() const { return period_; }
  const std::deque<DataPacket>& buffer() const { return buffer_; }
  std::size_t buffer_space() const {
    return cfg_.buffer_capacity - buffer_.size();
  }
  const std::map<NodeId, NeighborEntry>& neighbors() const { return nbrs_; }

  std::uint64_t nacks_sent() const { return nacks_sent_; }
  std::uint64_t nacks_received() const { return nacks_received_; }
  std::uint64_t data_tx_attempts() const { return data_tx_attempts_; }

  // ---- beaconing ------------------------------------------------------

  Frame make_beacon() {
    Frame f;
    f.kind = FrameKind::Beacon;
    f.src = self_;
    f.dst = kBroadcast;
    f.length = kBeaconBytes;
    f.beacon.src = self_;
    f.beacon.seq = ++beacon_seq_;
    f.beacon.path_cost = is_sink_ ? 0.0 : own_cost_;
    f.beacon.phase = current_phase ? current_phase() : Phase{};
    return f;
  }

  void start_beaconing(SimTime period, SimTime cover) {
    period_ = period;
    cover_ = cover;
    sim_.cancel(beacon_timer_);
    SimTime first = sim_.now() + rng_.uniform_time(period / 10, period);
    beacon_timer_ = sim_.schedule(first, [this] { emit_beacon(); });
  }

  void stop_beaconing() { sim_.cancel(beacon_timer_); }

  void emit_beacon() {
    SimTime jittered =
        period_ * 9 / 10 + rng_.uniform_time(0, period_ / 5);
    beacon_timer_ =
        sim_.schedule(sim_.now() + jittered, [this] { emit_beacon(); });
    if (can_transmit && !can_transmit()) return;
    if (!mac_.idle()) return;  // skip rather than queue up beacons
    mac_.broadcast(make_beacon(), cover_);
  }

  // Clears parent and own cost; advertised costs go stale so selection
  // waits for fresh beacons. Learned link quality is kept.
  void reset_route() {
    parent_ = kNoNode;
    if (!is_sink_) own_cost_ = kInfiniteCost;
    consecutive_noack_ = 0;
    for (auto& [id, n] : nbrs_) {
      n.advertised_cost = kInfiniteCost;
      n.seq_valid = false;
      n.last_heard = 0;
    }
  }

  // Fresh cost carried back in a data ack/nack; keeps the gradient
  // converging at data rate rather than at beacon rate.
  void update_peer_cost(NodeId peer, double cost) {
    if (is_sink_) return;
    auto& n = nbrs_[peer];
    n.advertised_cost = cost;
    n.last_heard = sim_.now();
    recompute_parent(false);
  }

  void note_strobe(NodeId src, SimTime listen_start, bool broadcast) {
    if (is_sink_) return;
    const MacConfig& mc = mac_.config();
    // Unicast trains pace strobes by the jittered gap; broadcast covers
    // alternate strobe and payload (floods carry a beacon).
    // Broadcast covers defer to concurrent traffic in multi-millisecond
    // pauses that look like loss, so their samples carry less weight.
    SimTime period = broadcast
                         ? mc.t_strobe + mc.air_time(kBeaconBytes)
                         : mc.t_strobe + mc.t_gap * 3 / 2;
    nbrs_[src].strobe_sample(sim_.now(), listen_start, period,
                             broadcast ? 0.05 : 0.1);
  }

  void handle_beacon(const Frame& f) {
    if (on_phase_beacon) on_phase_beacon(f);  // may reset routing state
    if (is_sink_) return;
    const BeaconBody& b = f.beacon;
    auto& n = nbrs_[b.src];
    if (!n.seq_valid) {
      n.recv_ratio = cfg_.etx_alpha * n.recv_ratio + (1 - cfg_.etx_alpha);
      n.seq_valid = true;
      n.last_seq = b.seq;
    } else if (b.seq > n.last_seq) {
      std::uint32_t gap = b.seq - n.last_seq;
      for (std::uint32_t i = 1; i < gap && i <= 10; ++i)
        n.recv_ratio *= cfg_.etx_alpha;
      n.recv_ratio = cfg_.etx_alpha * n.recv_ratio + (1 - cfg_.etx_alpha);
      n.last_seq = b.seq;
    }
    n.advertised_cost = b.path_cost;
    n.last_heard = sim_.now();
    recompute_parent();
  }

  void recompute_parent(bool kick_after = true) {
    if (is_sink_) return;
    NodeId best = kNoNode;
    double best_cost = kInfiniteCost;
    SimTime horizon = std::max(3 * period_ + period_ / 2, sec(120));
    auto usable = [&](const NeighborEntry& n) {
      return n.advertised_cost < kInfiniteCost &&
             n.last_heard + horizon >= sim_.now();
    };
    for (const auto& [id, n] : nbrs_) {
      if (!usable(n)) continue;
      double c = n.advertised_cost + n.link_etx();
      if (c < best_cost) {
        best_cost = c;
        best = id;
      }
    }
    // Hysteresis: switching parents mid-stream invites routing loops, so a
    // challenger must beat the incumbent by a full expected transmission.
    if (parent_ != kNoNode && best != parent_) {
      auto it = nbrs_.find(parent_);
      if (it != nbrs_.end() && usable(it->second)) {
        double pc = it->second.advertised_cost + it->second.link_etx();
        if (best_cost > pc - 1.5) {
          best = parent_;
          best_cost = pc;
        }
      }
    }
    bool had_parent = parent_ != kNoNode;
    parent_ = best;
    own_cost_ = best == kNoNode ? kInfiniteCost : best_cost;
    if (parent_ != kNoNode) {
      if (!had_parent && on_parent_acquired) on_parent_acquired();
      if (kick_after) kick();
    }
  }

  // ---- data path --------------------------------------------------------

  // Enqueues one of this node's own packets. False when the buffer is full;
  // the origin keeps it and re-offers later.
  bool offer(const DataPacket& p) {
    if (buffer_.size() >= cfg_.buffer_capacity) return false;
    buffer_.push_back(p);
    kick();
    return true;
  }

  void kick() {
    if (sending_ || is_sink_ || buffer_.empty()) return;
    if (parent_ == kNoNode) return;
    if (can_transmit && !can_transmit()) return;
    auto it = std::find_if(buffer_.begin(), buffer_.end(), [&](const DataPacket& q) {
      return q.not_before <= sim_.now();
    });
    if (it == buffer_.end()) {
      SimTime next = buffer_.front().not_before;
      for (const auto& q : buffer_) next = std::min(next, q.not_before);
      schedule_kick(next - sim_.now());
      return;
    }
    if (it != buffer_.begin()) std::rotate(buffer_.begin(), it, it + 1);
    sending_ = true;
    ++data_tx_attempts_;
    mac_.send_unicast(parent_, front_frame(),
                      [this](SendResult r) { on_send_result(r); });
  }

  RxDecision handle_data(const Frame& f) {
    const DataBody& d = f.data;
    if (is_sink_) {
      // Any data reception resets the sink's quiescence clock: even a
      // duplicate proves the network is still actively draining, and ending
      // the collection under a busy relay strands the backlog behind it.
      if (on_sink_data_rx) on_sink_data_rx();
      auto& seen = sink_seen_[d.origin];
      if (seen.insert(d.origin_seq).second) {
        trace("sink-deliver", d.origin, d.origin_seq);
        if (on_sink_deliver) on_sink_deliver(d);
      } else {
        if (on_sink_duplicate) on_sink_duplicate(d);
      }
      return RxDecision::Ack;
    }
    for (const auto& q : buffer_)
      if (q.origin == d.origin && q.origin_seq == d.origin_seq) {
        trace("ack-inbuffer", d.origin, d.origin_seq);
        return RxDecision::Ack;  // duplicate, a copy is still held here
      }
    // Already handed a copy of this packet downstream: refuse the retry.
    // A nack is conservation-safe (the sender keeps its copy), and it stops
    // a fork from multiplying through this node. The entry expires so a
    // stalled original can still get through eventually.
    auto fwd = forwarded_.find({d.origin, d.origin_seq});
    if (fwd != forwarded_.end()) {
      if (fwd->second + sec(20) > sim_.now()) {
        ++nacks_sent_;
        trace("nack-dup", d.origin, d.origin_seq);
        return RxDecision::NackDup;
      }
      forwarded_.erase(fwd);
    }
    // A node that cannot forward anything is no use as a next hop.
    if (parent_ == kNoNode) {
      ++nacks_sent_;
      trace("nack-noroute", d.origin, d.origin_seq);
      return RxDecision::Nack;
    }
    if (buffer_.size() >= cfg_.buffer_capacity) {
      ++nacks_sent_;
      return RxDecision::Nack;
    }
    trace("enqueue", d.origin, d.origin_seq);
    DataPacket p;
    p.origin = d.origin;
    p.received_from = f.src;
    p.origin_seq = d.origin_seq;
    p.first_record_seq = d.first_record_seq;
    p.record_count = d.record_count;
    p.payload_size = f.length - kDataHeaderBytes;
    p.generated_at = d.generated_at;
    buffer_.push_back(p);
    // Pause before forwarding: the upstream sender may not have heard the
    // ack, and its fast retry must land while the packet is still here.
    schedule_kick(rng_.uniform_time(mac_.wakeup_interval() / 2,
                                    mac_.wakeup_interval()));
    return RxDecision::Ack;
  }

 private:
  Frame front_frame() const {
    const DataPacket& p = buffer_.front();
    Frame f;
    f.kind = FrameKind::Data;
    f.src = self_;
    f.dst = parent_;
    f.length = kDataHeaderBytes + p.payload_size;
    f.data.path_cost = own_cost_;
    f.data.origin = p.origin;
    f.data.origin_seq = p.origin_seq;
    f.data.first_record_seq = p.first_record_seq;
    f.data.record_count = p.record_count;
    f.data.generated_at = p.generated_at;
    return f;
  }

  // The parent just acked and is holding the rendezvous open: stream the
  // next sendable packet without a fresh strobe train.
  bool try_followup() {
    if (is_sink_ || parent_ == kNoNode || buffer_.empty()) return false;
    if (can_transmit && !can_transmit()) return false;
    auto it = std::find_if(
        buffer_.begin(), buffer_.end(),
        [&](const DataPacket& q) { return q.not_before <= sim_.now(); });
    if (it == buffer_.end()) return false;
    if (it != buffer_.begin()) std::rotate(buffer_.begin(), it, it + 1);
    sending_ = true;
    followup_ = true;
    ++data_tx_attempts_;
    mac_.send_followup(parent_, front_frame(),
                       [this](SendResult r) { on_send_result(r); });
    return true;
  }

  void trace(const char* what, NodeId origin, std::uint32_t seq) {
    static const bool on = std::getenv("WSNSIM_TRACE") != nullptr;
    if (on)
      std::fprintf(stderr, "%.6f n%u %s (%u,%u)\n", to_seconds(sim_.now()),
                   self_, what, origin, seq);
  }

  void on_send_result(SendResult r) {
    {
      static const bool on = std::getenv("WSNSIM_TRACE2") != nullptr;
      if (on && !buffer_.empty())
        std::fprintf(stderr, "%.6f n%u result %d parent=%u pkt=(%u,%u)\n",
                     to_seconds(sim_.now()), self_, int(r), parent_,
                     buffer_.front().origin, buffer_.front().origin_seq);
    }
    sending_ = false;
    bool was_followup = followup_;
    followup_ = false;
    if (parent_ != kNoNode && r != SendResult::ChannelBusy) {
      // Ack or nack both prove the round trip. Silence counts fully
      // against the link when the strobe ack showed the receiver awake;
      // a strobe-deaf train counts only softly (could be congestion).
      if (r != SendResult::NoAck) nbrs_[parent_].data_sample(true);
      else if (mac_.last_strobe_acked()) nbrs_[parent_].data_sample(false);
      else nbrs_[parent_].data_sample_soft(false);
      recompute_parent(false);  // re-cost; sending resumes via kick/backoff
    }
    switch (r) {
      case SendResult::Acked: {
        consecutive_noack_ = 0;
        fast_retry_used_ = false;
        backoff_cap_ = backoff_cap_init();
        DataPacket p = buffer_.front();
        trace("pop-acked", p.origin, p.origin_seq);
        forwarded_[{p.origin, p.origin_seq}] = sim_.now();
        buffer_.pop_front();
        // Fire only for the original copy; a looped-back copy of our own
        // packet re-enters via handle_data and must not re-trigger origin
        // bookkeeping (e.g. flash erasure).
        if (p.origin == self_ && p.received_from == kNoNode && on_origin_acked)
          on_origin_acked(p);
        sending_ = true;  // hold the lock while the refill runs
        if (on_feed) on_feed();
        sending_ = false;
        if (try_followup()) break;
        // Brief pause between strobed sends: keeps one busy node from
        // hogging the channel and leaves windows for children to forward.
        schedule_kick(rng_.uniform_time(mac_.wakeup_interval() / 4,
                                        mac_.wakeup_interval()));
        break;
      }
      case SendResult::Nacked:
        ++nacks_received_;
        consecutive_noack_ = 0;
        fast_retry_used_ = false;
        backoff();
        break;
      case SendResult::NackedDup:
        // The parent already forwarded a copy. Ours cannot be dropped (the
        // downstream copy is not provably alive), but it should stop
        // competing for air time: park it and let fresh traffic through.
        ++nacks_received_;
        consecutive_noack_ = 0;
        fast_retry_used_ = false;
        if (!buffer_.empty())
          buffer_.front().not_before =
              sim_.now() + rng_.uniform_time(sec(6), sec(12));
        backoff();
        break;
      case SendResult::NoAck:
        // A silent followup just means the receiver left the rendezvous;
        // retry promptly with a normal strobed unicast.
        if (was_followup) {
          schedule_kick(rng_.uniform_time(msec(20), msec(80)));
          break;
        }
        // The payload went out but the ack vanished: retry at once, while
        // the receiver still holds the packet in its buffer. A late retry
        // arrives after it forwarded and forks a second live copy.
        if (mac_.last_strobe_acked() && !fast_retry_used_) {
          fast_retry_used_ = true;
          schedule_kick(rng_.uniform_time(msec(20), msec(80)));
          break;
        }
        if (++consecutive_noack_ >= 8) {
          // Persistent silence: penalize the link past the hysteresis
          // margin and re-run selection instead of going routeless.
          consecutive_noack_ = 0;
          if (parent_ != kNoNode) {
            nbrs_[parent_].data_sample(false);
            nbrs_[parent_].data_sample(false);
            NodeId old = parent_;
            parent_ = kNoNode;
            recompute_parent(false);
            if (parent_ == kNoNode) parent_ = old;  // no alternative: keep it
          }
        }
        backoff();
        break;
      case SendResult::ChannelBusy:
        // Sustained busy means the cell is saturated; escalate the same
        // cap as collision backoff so contenders spread out over time.
        backoff();
        break;
    }
  }

  // A unicast exchange occupies the channel for up to a full wake-up
  // interval of strobing, so retry spacing scales with the interval: a
  // floor below one train length just re-collides with the same train.
  SimTime backoff_floor() const { return mac_.wakeup_interval() / 2; }
  SimTime backoff_cap_init() const { return 4 * mac_.wakeup_interval(); }
  // Under sustained contention the cap must grow far past one interval:
  // with every node holding a packet, offered load only drops below the
  // channel's service rate once retries spread over tens of intervals.
  SimTime backoff_cap_max() const {
    return std::max(mac_.config().backoff_max, 32 * mac_.wakeup_interval());
  }

  void backoff() {
    // Full-range randomization; a narrow window keeps contending
    // neighbors retrying in lockstep.
    if (backoff_cap_ < backoff_cap_init()) backoff_cap_ = backoff_cap_init();
    SimTime delay = rng_.uniform_time(backoff_floor(), backoff_cap_);
    backoff_cap_ = std::min(backoff_cap_ * 2, backoff_cap_max());
    schedule_kick(delay);
  }

  void schedule_kick(SimTime delay) {
    sim_.schedule(sim_.now() + delay, [this] { kick(); });
  }

  Simulator& sim_;
  Mac& mac_;
  Rng& rng_;
  RoutingConfig cfg_;
  NodeId self_;
  bool is_sink_;

  std::map<NodeId, NeighborEntry> nbrs_;
  NodeId parent_ = kNoNode;
  double own_cost_ = kInfiniteCost;
  std::uint32_t beacon_seq_ = 0;
  SimTime period_ = sec(30);
  SimTime cover_ = msec(500);
  EventHandle beacon_timer_;

  std::deque<DataPacket> buffer_;
  bool sending_ = false;
  bool followup_ = false;
  bool fast_retry_used_ = false;
  int consecutive_noack_ = 0;
  SimTime backoff_cap_;

  std::map<NodeId, std::set<std::uint32_t>> sink_seen_;
  // (origin, seq) -> when a copy was last acked downstream.
  std::map<std::pair<NodeId, std::uint32_t>, SimTime> forwarded_;

  std::uint64_t nacks_sent_ = 0;
  std::uint64_t nacks_received_ = 0;
  std::uint64_t data_tx_attempts_ = 0;
};

}  // namespace wsn
