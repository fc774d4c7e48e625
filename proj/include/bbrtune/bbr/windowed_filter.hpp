#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <stdexcept>

namespace bbrtune::bbr {

// Sliding-window extremum over (stamp, value) samples.
//
// An entry is live while stamp > now - window. Expired entries are evicted on
// query, so shrinking the window drops them for good; enlarging it later does
// not bring them back. Entries that can never again be the extremum (an older
// entry no better than a newer one) are dropped on insert, which keeps the
// deque monotone and every operation amortized O(1).
template <typename Value, typename Better>
class WindowedFilter {
 public:
  struct Entry {
    std::int64_t stamp;
    Value value;
  };

  explicit WindowedFilter(std::int64_t window) { set_window(window); }

  void set_window(std::int64_t window) {
    if (window <= 0) throw std::invalid_argument("filter window must be positive");
    window_ = window;
  }
  std::int64_t window() const { return window_; }

  // Stamps must be non-decreasing.
  void insert(std::int64_t stamp, Value value) {
    if (!entries_.empty() && stamp < entries_.back().stamp) {
      throw std::invalid_argument("filter stamps must be non-decreasing");
    }
    while (!entries_.empty() && !better_(entries_.back().value, value)) entries_.pop_back();
    entries_.push_back({stamp, value});
  }

  std::optional<Value> query(std::int64_t now) {
    while (!entries_.empty() && entries_.front().stamp <= now - window_) entries_.pop_front();
    if (entries_.empty()) return std::nullopt;
    return entries_.front().value;
  }

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  // Strictly better: an older entry survives an insert only if it beats the new value.
  Better better_{};
  std::int64_t window_ = 1;
  std::deque<Entry> entries_;
};

// BtlBw: max of delivery-rate samples (bits/s) over the last `window` rounds.
using WindowedMaxFilter = WindowedFilter<double, std::greater<double>>;
// RTprop: min of RTT samples (us) over the last `window` microseconds.
using WindowedMinFilter = WindowedFilter<std::int64_t, std::less<std::int64_t>>;

}  // namespace bbrtune::bbr
