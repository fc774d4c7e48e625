#pragma once

#include <cmath>
#include <cstdint>

namespace bbrtune {

// Simulated time and durations, in microseconds.
using SimTime = std::int64_t;
using FlowId = std::uint32_t;

inline constexpr std::int64_t kMss = 1500;
inline constexpr SimTime kUsPerMs = 1'000;
inline constexpr SimTime kUsPerSec = 1'000'000;

inline SimTime from_seconds(double s) { return static_cast<SimTime>(std::llround(s * 1e6)); }
inline SimTime from_millis(double ms) { return static_cast<SimTime>(std::llround(ms * 1e3)); }
inline double to_seconds(SimTime t) { return static_cast<double>(t) * 1e-6; }
inline double to_millis(SimTime t) { return static_cast<double>(t) * 1e-3; }

// Time to serialize `bytes` onto a link of `bps`, in (fractional) microseconds.
inline double serialization_us(std::int64_t bytes, double bps) {
  return static_cast<double>(bytes) * 8.0 * 1e6 / bps;
}

}  // namespace bbrtune
