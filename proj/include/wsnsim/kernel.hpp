#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <utility>

#include "wsnsim/sim_time.hpp"

namespace wsn {

struct EventHandle {
  SimTime at = kNoTime;
  std::uint64_t seq = 0;
  bool valid() const { return at != kNoTime; }
  void reset() { at = kNoTime; seq = 0; }
};

struct RunStats {
  std::uint64_t events_dispatched = 0;
  double wall_seconds = 0.0;
};

class LivelockError : public std::runtime_error {
 public:
  explicit LivelockError(const std::string& what) : std::runtime_error(what) {}
};

// Deterministic discrete-event scheduler. Events at equal times dispatch
// in scheduling order (seq tiebreak). The dispatch trace is hashed so two
// runs can be compared bit-for-bit.
class Simulator {
 public:
  SimTime now() const { return now_; }

  EventHandle schedule(SimTime fire_at, std::function<void()> fn) {
    if (fire_at < now_)
      throw std::logic_error("schedule: fire_at is in the past");
    std::uint64_t seq = next_seq_++;
    queue_.emplace(std::make_pair(fire_at, seq), std::move(fn));
    return EventHandle{fire_at, seq};
  }

  // True iff the event was still pending.
  bool cancel(const EventHandle& h) {
    if (!h.valid()) return false;
    return queue_.erase(std::make_pair(h.at, h.seq)) > 0;
  }

  RunStats run_until(SimTime t_end) {
    auto wall_start = std::chrono::steady_clock::now();
    RunStats stats;
    while (!queue_.empty()) {
      auto it = queue_.begin();
      SimTime at = it->first.first;
      if (at > t_end) break;
      // Total-order assertion: keys in the map are already sorted, but the
      // clock must never move backwards.
      if (at < now_) throw std::logic_error("event queue time regression");
      advance_clock(at);
      std::uint64_t seq = it->first.second;
      auto fn = std::move(it->second);
      queue_.erase(it);
      hash_event(at, seq);
      ++events_this_second_;
      if (events_this_second_ > events_per_second_cap_)
        throw LivelockError("event storm: more than " +
                            std::to_string(events_per_second_cap_) +
                            " events in one simulated second");
      ++stats.events_dispatched;
      fn();
    }
    advance_clock(t_end);
    total_dispatched_ += stats.events_dispatched;
    stats.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      wall_start)
            .count();
    return stats;
  }

  std::uint64_t trace_hash() const { return trace_hash_; }
  std::uint64_t total_dispatched() const { return total_dispatched_; }
  void set_events_per_second_cap(std::uint64_t cap) {
    events_per_second_cap_ = cap;
  }

 private:
  void advance_clock(SimTime t) {
    if (t / 1000000ull != now_ / 1000000ull) events_this_second_ = 0;
    if (t > now_) now_ = t;
  }

  void hash_event(SimTime at, std::uint64_t seq) {
    auto mix = [this](std::uint64_t v) {
      for (int i = 0; i < 8; ++i) {
        trace_hash_ ^= (v >> (8 * i)) & 0xff;
        trace_hash_ *= 0x100000001b3ull;  // FNV-1a prime
      }
    };
    mix(at);
    mix(seq);
  }

  SimTime now_ = 0;
  std::uint64_t next_seq_ = 0;
  std::map<std::pair<SimTime, std::uint64_t>, std::function<void()>> queue_;
  std::uint64_t trace_hash_ = 0xcbf29ce484222325ull;  // FNV offset basis
  std::uint64_t total_dispatched_ = 0;
  std::uint64_t events_this_second_ = 0;
  std::uint64_t events_per_second_cap_ = 20000000;
};

}  // namespace wsn
