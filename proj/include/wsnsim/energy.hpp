#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

#include "wsnsim/frame.hpp"
#include "wsnsim/sim_time.hpp"

namespace wsn {

// Radio/MAC state; doubles as the per-state energy label.
enum class MacState : std::uint8_t {
  RadioOff,
  ChannelCheck,
  RxActive,
  TxStrobe,
  WaitStrobeAck,
  TxPayload,
  WaitPayloadAck,
  TxAck,
};

inline constexpr std::size_t kMacStateCount = 8;

inline const char* to_string(MacState s) {
  static const char* names[] = {"radio_off",   "channel_check",
                                "rx_active",   "tx_strobe",
                                "wait_strobe_ack", "tx_payload",
                                "wait_payload_ack", "tx_ack"};
  return names[static_cast<std::size_t>(s)];
}

inline bool is_listening(MacState s) {
  return s == MacState::ChannelCheck || s == MacState::RxActive ||
         s == MacState::WaitStrobeAck || s == MacState::WaitPayloadAck;
}

inline bool is_transmitting(MacState s) {
  return s == MacState::TxStrobe || s == MacState::TxPayload ||
         s == MacState::TxAck;
}

// Idle-listening vs data-transmission attribution: channel sampling and
// passive reception count as idle listening, everything tied to an active
// exchange counts as data transmission.
inline bool is_data_attributed(MacState s) {
  return is_transmitting(s) || s == MacState::WaitStrobeAck ||
         s == MacState::WaitPayloadAck;
}

struct PowerProfile {
  double p_radio_rx_mw = 60.0;
  double p_radio_tx_mw = 52.2;
  double p_radio_off_mw = 0.0006;
  double p_mcu_active_mw = 5.4;
  double p_mcu_sleep_mw = 0.0163;
  double e_flash_write_uj_per_byte = 0.257;
  double e_flash_read_uj_per_byte = 0.056;

  double radio_power(MacState s) const {
    if (s == MacState::RadioOff) return p_radio_off_mw;
    return is_transmitting(s) ? p_radio_tx_mw : p_radio_rx_mw;
  }
};

struct PhaseKey {
  PhaseId id = PhaseId::Collection;
  std::uint32_t epoch = 0;
  auto operator<=>(const PhaseKey&) const = default;
};

// Per-component power split over some window, all in mW.
struct ComponentPower {
  double mcu = 0, radio_idle = 0, radio_tx = 0, flash = 0;
  double total() const { return mcu + radio_idle + radio_tx + flash; }
  ComponentPower& operator+=(const ComponentPower& o) {
    mcu += o.mcu; radio_idle += o.radio_idle;
    radio_tx += o.radio_tx; flash += o.flash;
    return *this;
  }
};

// Per-node time/energy bookkeeping: per (phase id, epoch) sub-ledgers of
// radio state durations, MCU state durations, and flash byte counters.
// Intervals are closed at every state or phase transition, so a phase
// change splits the open interval at exactly the change instant.
class NodeLedger {
 public:
  struct Bucket {
    std::array<SimTime, kMacStateCount> radio{};
    SimTime mcu_active = 0, mcu_sleep = 0;
    std::uint64_t flash_written = 0, flash_read = 0;

    double energy_mj(const PowerProfile& p) const {
      double e = 0;
      for (std::size_t i = 0; i < kMacStateCount; ++i)
        e += p.radio_power(static_cast<MacState>(i)) *
             to_seconds(radio[i]);
      e += p.p_mcu_active_mw * to_seconds(mcu_active);
      e += p.p_mcu_sleep_mw * to_seconds(mcu_sleep);
      e += (double(flash_written) * p.e_flash_write_uj_per_byte +
            double(flash_read) * p.e_flash_read_uj_per_byte) /
           1000.0;  // uJ -> mJ
      return e;
    }

    // Power split assuming the bucket spans `window` of simulated time.
    ComponentPower power_mw(const PowerProfile& p, SimTime window) const {
      ComponentPower c;
      if (window == 0) return c;
      double w = to_seconds(window);
      for (std::size_t i = 0; i < kMacStateCount; ++i) {
        auto s = static_cast<MacState>(i);
        double e = p.radio_power(s) * to_seconds(radio[i]);
        (is_data_attributed(s) ? c.radio_tx : c.radio_idle) += e / w;
      }
      c.mcu = (p.p_mcu_active_mw * to_seconds(mcu_active) +
               p.p_mcu_sleep_mw * to_seconds(mcu_sleep)) /
              w;
      c.flash = (double(flash_written) * p.e_flash_write_uj_per_byte +
                 double(flash_read) * p.e_flash_read_uj_per_byte) /
                1000.0 / w;
      return c;
    }
  };

  void set_window(SimTime from, SimTime to) {
    win_from_ = from;
    win_to_ = to;
  }

  void start(SimTime now, Phase phase, bool radio_initially_on) {
    phase_ = phase;
    radio_state_ = radio_initially_on ? MacState::RxActive : MacState::RadioOff;
    radio_since_ = now;
    mcu_active_ = radio_initially_on;
    mcu_since_ = now;
    started_ = true;
  }

  void set_radio_state(SimTime now, MacState s) {
    if (s == radio_state_) return;
    close_radio(now);
    radio_state_ = s;
    update_mcu(now);
  }

  MacState radio_state() const { return radio_state_; }

  // MCU is active while the radio is on or shortly after a CPU-work pulse
  // (sensor sampling, flash handling).
  void mcu_pulse(SimTime now, SimTime duration) {
    if (now + duration > pulse_until_) pulse_until_ = now + duration;
    update_mcu(now);
  }

  SimTime pulse_until() const { return pulse_until_; }

  void update_mcu(SimTime now) {
    bool want = radio_state_ != MacState::RadioOff || now < pulse_until_;
    if (want != mcu_active_) {
      close_mcu(now);
      mcu_active_ = want;
    }
  }

  void add_flash(SimTime now, std::uint64_t written, std::uint64_t read) {
    total_[key()].flash_written += written;
    total_[key()].flash_read += read;
    if (now >= win_from_ && now < win_to_) {
      windowed_[key()].flash_written += written;
      windowed_[key()].flash_read += read;
    }
  }

  void on_phase_change(SimTime now, Phase p) {
    close_radio(now);
    close_mcu(now);
    phase_ = p;
  }

  void finalize(SimTime now) {
    close_radio(now);
    close_mcu(now);
    end_ = now;
  }

  const std::map<PhaseKey, Bucket>& phase_buckets() const { return total_; }
  const std::map<PhaseKey, Bucket>& windowed_buckets() const {
    return windowed_;
  }

  Bucket run_total() const { return sum(total_); }
  Bucket window_total() const { return sum(windowed_); }

  // Tick-exact partition check: per component, state durations must sum to
  // the run length.
  bool time_partition_ok(SimTime run_length) const {
    SimTime radio = 0, mcu = 0;
    for (const auto& [k, b] : total_) {
      for (auto d : b.radio) radio += d;
      mcu += b.mcu_active + b.mcu_sleep;
    }
    return radio == run_length && mcu == run_length;
  }

  // Residual between whole-run energy and the sum over phase sub-ledgers,
  // in microjoules. Zero by construction up to float rounding.
  double phase_energy_residual_uj(const PowerProfile& p) const {
    double total = run_total().energy_mj(p);
    double parts = 0;
    for (const auto& [k, b] : total_) parts += b.energy_mj(p);
    return (total - parts) * 1000.0;
  }

 private:
  PhaseKey key() const { return PhaseKey{phase_.id, phase_.epoch}; }

  static Bucket sum(const std::map<PhaseKey, Bucket>& m) {
    Bucket out;
    for (const auto& [k, b] : m) {
      for (std::size_t i = 0; i < kMacStateCount; ++i) out.radio[i] += b.radio[i];
      out.mcu_active += b.mcu_active;
      out.mcu_sleep += b.mcu_sleep;
      out.flash_written += b.flash_written;
      out.flash_read += b.flash_read;
    }
    return out;
  }

  void add_clipped(SimTime from, SimTime to, auto&& apply) {
    apply(total_[key()], to - from);
    SimTime cf = from > win_from_ ? from : win_from_;
    SimTime ct = to < win_to_ ? to : win_to_;
    if (ct > cf) apply(windowed_[key()], ct - cf);
  }

  void close_radio(SimTime now) {
    if (!started_ || now < radio_since_)
      throw std::logic_error("ledger: radio interval regression");
    auto idx = static_cast<std::size_t>(radio_state_);
    add_clipped(radio_since_, now,
                [&](Bucket& b, SimTime d) { b.radio[idx] += d; });
    radio_since_ = now;
  }

  void close_mcu(SimTime now) {
    if (!started_ || now < mcu_since_)
      throw std::logic_error("ledger: mcu interval regression");
    bool active = mcu_active_;
    add_clipped(mcu_since_, now, [&](Bucket& b, SimTime d) {
      (active ? b.mcu_active : b.mcu_sleep) += d;
    });
    mcu_since_ = now;
  }

  bool started_ = false;
  Phase phase_;
  MacState radio_state_ = MacState::RadioOff;
  SimTime radio_since_ = 0;
  bool mcu_active_ = false;
  SimTime mcu_since_ = 0;
  SimTime pulse_until_ = 0;
  SimTime win_from_ = 0, win_to_ = kNoTime;
  SimTime end_ = 0;
  std::map<PhaseKey, Bucket> total_;
  std::map<PhaseKey, Bucket> windowed_;
};

}  // namespace wsn
