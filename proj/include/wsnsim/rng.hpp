#pragma once

#include <cstdint>

#include "wsnsim/sim_time.hpp"

namespace wsn {

// splitmix64 step; also used as the stream mixing function.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Deterministic, platform-independent RNG substream. A stream is fully
// defined by (seed, stream id); the protocol stream of node n uses
// stream id n, the channel uses a dedicated id outside the node range.
class Rng {
 public:
  Rng() : state_(0x853c49e6748fea9bull) {}
  Rng(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s);
    s = stream ^ 0xda3e39cb94b95bdbull;
    std::uint64_t b = splitmix64(s);
    state_ = a ^ (b + 0x9e3779b97f4a7c15ull);
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0, 1). Uses the top 53 bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
  }

  bool bernoulli(double p) {
    if (p <= 0.0) { next_u64(); return false; }  // always consume one draw
    if (p >= 1.0) { next_u64(); return true; }
    return uniform() < p;
  }

  // Uniform integer in [lo, hi] inclusive.
  std::uint64_t uniform_range(std::uint64_t lo, std::uint64_t hi) {
    if (hi <= lo) return lo;
    std::uint64_t span = hi - lo + 1;
    return lo + next_u64() % span;
  }

  SimTime uniform_time(SimTime lo, SimTime hi) { return uniform_range(lo, hi); }

 private:
  std::uint64_t state_;
};

// Stream ids for non-node substreams.
inline constexpr std::uint64_t kChannelStream = 0xffff0001ull;
inline constexpr std::uint64_t kTopologyStream = 0xffff0002ull;

}  // namespace wsn
