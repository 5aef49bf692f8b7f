#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace wsn {

// Simulated time in microseconds since run start. 64 bits hold ~584k years.
using SimTime = std::uint64_t;

inline constexpr SimTime kNoTime = ~SimTime{0};

constexpr SimTime usec(std::uint64_t v) { return v; }
constexpr SimTime msec(std::uint64_t v) { return v * 1000ull; }
constexpr SimTime sec(std::uint64_t v) { return v * 1000000ull; }
constexpr SimTime minutes(std::uint64_t v) { return v * 60ull * 1000000ull; }

constexpr double to_seconds(SimTime t) { return static_cast<double>(t) / 1e6; }

inline SimTime from_seconds(double s) {
  if (s < 0) throw std::invalid_argument("negative duration");
  return static_cast<SimTime>(s * 1e6 + 0.5);
}

// Parses "10ms", "4s", "45.5s", "120min", "250us" or a plain integer
// (microseconds). Returns nullopt on malformed input.
inline std::optional<SimTime> parse_duration(const std::string& text) {
  if (text.empty()) return std::nullopt;
  size_t pos = 0;
  double value;
  try {
    value = std::stod(text, &pos);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (value < 0) return std::nullopt;
  std::string unit = text.substr(pos);
  double scale;
  if (unit.empty() || unit == "us") scale = 1;
  else if (unit == "ms") scale = 1e3;
  else if (unit == "s") scale = 1e6;
  else if (unit == "min") scale = 60e6;
  else return std::nullopt;
  return static_cast<SimTime>(value * scale + 0.5);
}

inline std::string format_duration(SimTime t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6gs", to_seconds(t));
  return buf;
}

}  // namespace wsn
