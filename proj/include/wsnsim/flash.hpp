#pragma once

#include <cstdint>
#include <deque>
#include <stdexcept>
#include <vector>

#include "wsnsim/sim_time.hpp"

namespace wsn {

struct FlashRecord {
  std::uint32_t seq = 0;
  SimTime sensed_at = 0;
};

// Per-node persistent backlog of sensed records. FIFO; records already
// handed to a packet stay until that packet is acknowledged.
class FlashLog {
 public:
  FlashLog(std::uint64_t capacity_bytes, std::uint64_t record_size)
      : capacity_(capacity_bytes), record_size_(record_size) {
    if (record_size_ == 0 || record_size_ > capacity_)
      throw std::invalid_argument("flash: record size must fit capacity");
  }

  std::uint64_t record_size() const { return record_size_; }
  std::uint64_t occupancy_bytes() const { return records_.size() * record_size_; }
  std::size_t record_count() const { return records_.size(); }
  std::size_t packetized() const { return packetized_; }
  std::size_t unpacketized() const { return records_.size() - packetized_; }
  std::uint64_t bytes_written() const { return bytes_written_; }
  std::uint64_t bytes_read() const { return bytes_read_; }
  std::uint64_t overflow_dropped() const { return overflow_; }
  const std::deque<FlashRecord>& records() const { return records_; }

  bool append(const FlashRecord& r) {
    if ((records_.size() + 1) * record_size_ > capacity_) {
      ++overflow_;
      return false;
    }
    records_.push_back(r);
    bytes_written_ += record_size_;
    return true;
  }

  // Marks the next n un-packetized records as handed to a packet and
  // returns them in FIFO order.
  std::vector<FlashRecord> bundle(std::size_t n) {
    if (n > unpacketized()) throw std::logic_error("flash: bundle overrun");
    std::vector<FlashRecord> out(records_.begin() + packetized_,
                                 records_.begin() + packetized_ + n);
    packetized_ += n;
    bytes_read_ += n * record_size_;
    return out;
  }

  // Erases the n oldest records (their packet was acknowledged).
  void erase_front(std::size_t n) {
    if (n > packetized_) throw std::logic_error("flash: erase before bundle");
    records_.erase(records_.begin(), records_.begin() + n);
    packetized_ -= n;
  }

 private:
  std::uint64_t capacity_;
  std::uint64_t record_size_;
  std::deque<FlashRecord> records_;
  std::size_t packetized_ = 0;
  std::uint64_t bytes_written_ = 0;
  std::uint64_t bytes_read_ = 0;
  std::uint64_t overflow_ = 0;
};

// Longest pull interval the flash can absorb: floor(capacity / record) full
// records accumulate during one sleep phase.
inline SimTime max_pull_interval(std::uint64_t capacity_bytes,
                                 std::uint64_t record_size_bytes,
                                 SimTime sampling_interval) {
  if (capacity_bytes == 0 || record_size_bytes == 0 || sampling_interval == 0)
    throw std::invalid_argument("max_pull_interval: arguments must be positive");
  if (record_size_bytes > capacity_bytes)
    throw std::invalid_argument("max_pull_interval: record exceeds capacity");
  return (capacity_bytes / record_size_bytes) * sampling_interval;
}

}  // namespace wsn
