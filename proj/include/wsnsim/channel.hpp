#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "wsnsim/frame.hpp"
#include "wsnsim/kernel.hpp"
#include "wsnsim/rng.hpp"
#include "wsnsim/topology.hpp"

namespace wsn {

// Frame on the air.
struct AirFrame {
  std::uint64_t id = 0;
  NodeId src = kNoNode;
  Frame frame;
  SimTime tx_start = 0;
  SimTime tx_end = 0;
  std::set<NodeId> collided_at;
};

// Delivers frames from a transmitting radio to every audible radio that
// listened over the whole air interval. Any audible overlap destroys both
// frames at that receiver; per-link loss is an independent Bernoulli draw
// from the dedicated channel substream.
class Channel {
 public:
  Channel(Simulator& sim, const Topology& topo, std::uint64_t seed)
      : sim_(sim), topo_(topo), rng_(seed, kChannelStream) {}

  // Time the node entered continuous listening, or kNoTime.
  using ListenSinceFn = std::function<SimTime(NodeId)>;
  using DeliverFn = std::function<void(NodeId, const Frame&)>;

  void set_handlers(ListenSinceFn listen_since, DeliverFn deliver) {
    listen_since_ = std::move(listen_since);
    deliver_ = std::move(deliver);
  }

  // Half-open air intervals: back-to-back frames do not collide.
  static bool intervals_collide(SimTime a_start, SimTime a_end,
                                SimTime b_start, SimTime b_end) {
    return a_start < b_end && b_start < a_end;
  }

  bool busy_at(NodeId n) const {
    for (const auto& a : active_)
      if (a.tx_end > sim_.now() && a.src != n && topo_.audible(a.src, n))
        return true;
    return false;
  }

  // End of the most recent transmission audible at n (including ongoing
  // ones); lets a listener bridge the gaps of a strobe train instead of
  // sampling the channel at one instant.
  SimTime last_audible_end(NodeId n) const {
    auto it = last_air_end_.find(n);
    return it == last_air_end_.end() ? 0 : it->second;
  }

  void start_tx(NodeId src, const Frame& frame, SimTime air_time,
                std::function<void()> on_tx_end) {
    AirFrame tx;
    tx.id = next_id_++;
    tx.src = src;
    tx.frame = frame;
    tx.tx_start = sim_.now();
    tx.tx_end = sim_.now() + air_time;
    // Mark collisions against everything already on the air.
    for (auto& a : active_) {
      if (a.tx_end <= tx.tx_start) continue;  // ends exactly now: no overlap
      for (const auto& l : topo_.out_links(src)) {
        NodeId d = l.dst;
        if (d == a.src) continue;
        if (topo_.audible(a.src, d)) {
          a.collided_at.insert(d);
          tx.collided_at.insert(d);
        }
      }
    }
    for (const auto& l : topo_.out_links(src)) {
      SimTime& e = last_air_end_[l.dst];
      if (tx.tx_end > e) e = tx.tx_end;
    }
    std::uint64_t id = tx.id;
    {
      static const bool on = std::getenv("WSNSIM_TRACE3") != nullptr;
      if (on)
        std::fprintf(stderr, "%.6f air n%u kind=%d dst=%u len=%u\n",
                     to_seconds(tx.tx_start), src, int(frame.kind), frame.dst,
                     frame.length);
    }
    active_.push_back(std::move(tx));
    ++frames_sent_;
    sim_.schedule(active_.back().tx_end,
                  [this, id, done = std::move(on_tx_end)]() {
                    finish_tx(id, done);
                  });
  }

  std::uint64_t frames_sent() const { return frames_sent_; }
  std::uint64_t frames_delivered() const { return frames_delivered_; }

  // Outcome at the addressed destination of each unicast frame.
  struct FateCounters {
    std::uint64_t delivered = 0, prr_lost = 0, collided = 0, deaf = 0;
  };
  const std::map<FrameKind, FateCounters>& unicast_fates() const {
    return fates_;
  }

 private:
  void finish_tx(std::uint64_t id, const std::function<void()>& done) {
    AirFrame tx;
    for (auto it = active_.begin(); it != active_.end(); ++it) {
      if (it->id == id) {
        tx = std::move(*it);
        active_.erase(it);
        break;
      }
    }
    // Channel randomness is drawn for every out-link in a fixed order so
    // loss patterns do not depend on receiver state.
    std::vector<NodeId> receivers;
    for (const auto& l : topo_.out_links(tx.src)) {
      bool lucky = rng_.bernoulli(l.prr);
      bool addressed = l.dst == tx.frame.dst;
      if (!lucky) {
        if (addressed) ++fates_[tx.frame.kind].prr_lost;
        continue;
      }
      if (tx.collided_at.count(l.dst)) {
        if (addressed) ++fates_[tx.frame.kind].collided;
        continue;
      }
      SimTime since = listen_since_(l.dst);
      if (since == kNoTime || since > tx.tx_start) {
        if (addressed) ++fates_[tx.frame.kind].deaf;
        continue;
      }
      if (addressed) ++fates_[tx.frame.kind].delivered;
      receivers.push_back(l.dst);
    }
    for (NodeId d : receivers) {
      ++frames_delivered_;
      deliver_(d, tx.frame);
    }
    if (done) done();
  }

  Simulator& sim_;
  const Topology& topo_;
  Rng rng_;
  ListenSinceFn listen_since_;
  DeliverFn deliver_;
  std::vector<AirFrame> active_;
  std::uint64_t next_id_ = 1;
  std::uint64_t frames_sent_ = 0;
  std::uint64_t frames_delivered_ = 0;
  std::map<FrameKind, FateCounters> fates_;
  std::map<NodeId, SimTime> last_air_end_;
};

}  // namespace wsn
