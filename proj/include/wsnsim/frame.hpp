#pragma once

#include <cstdint>
#include <limits>

#include "wsnsim/sim_time.hpp"

namespace wsn {

using NodeId = std::uint16_t;

inline constexpr NodeId kSink = 0;
inline constexpr NodeId kBroadcast = std::numeric_limits<NodeId>::max();
inline constexpr NodeId kNoNode = kBroadcast - 1;

enum class FrameKind : std::uint8_t {
  Strobe,
  StrobeAck,
  Data,
  DataAck,
  DataNack,
  Beacon,
};

inline const char* to_string(FrameKind k) {
  switch (k) {
    case FrameKind::Strobe: return "strobe";
    case FrameKind::StrobeAck: return "strobe_ack";
    case FrameKind::Data: return "data";
    case FrameKind::DataAck: return "data_ack";
    case FrameKind::DataNack: return "data_nack";
    case FrameKind::Beacon: return "beacon";
  }
  return "?";
}

enum class PhaseId : std::uint8_t { Sleep, Collection };

inline const char* to_string(PhaseId p) {
  return p == PhaseId::Sleep ? "sleep" : "collection";
}

struct Phase {
  PhaseId id = PhaseId::Sleep;
  std::uint32_t epoch = 0;
  bool operator==(const Phase&) const = default;
};

// Routing advertisement; in pull mode it also carries the phase machine's
// control plane.
struct BeaconBody {
  NodeId src = kNoNode;
  std::uint32_t seq = 0;
  double path_cost = 0.0;  // ETX to sink; kInfiniteCost when unrouted
  Phase phase;
  bool flood = false;  // full-cover phase flood (counts toward suppression)
  bool dup_nack = false;  // refusal of an already-forwarded duplicate
};

inline constexpr double kInfiniteCost = 1e9;

struct DataBody {
  double path_cost = 0.0;  // sender's route cost; receivers enforce descent
  NodeId origin = kNoNode;
  std::uint32_t origin_seq = 0;
  std::uint32_t first_record_seq = 0;
  std::uint16_t record_count = 0;
  SimTime generated_at = 0;  // sensing time of the oldest bundled record
};

struct Frame {
  FrameKind kind = FrameKind::Strobe;
  NodeId src = kNoNode;
  NodeId dst = kBroadcast;
  std::uint16_t length = 8;  // bytes on air, 8..128
  bool broadcast_strobe = false;  // strobe announcing a broadcast payload
  BeaconBody beacon;
  DataBody data;
};

}  // namespace wsn
