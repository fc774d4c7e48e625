#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "bbrtune/agents/host_agent.hpp"
#include "bbrtune/env/action.hpp"

namespace bbrtune::agents {

inline constexpr std::uint8_t kWireVersion = 1;

enum class MsgKind : std::uint8_t { kHello = 1, kStats = 2, kParams = 3, kAck = 4, kError = 5 };

struct WireMessage {
  std::uint8_t version = kWireVersion;
  MsgKind kind = MsgKind::kAck;
  std::uint32_t agent_id = 0;
  std::uint64_t epoch = 0;
  std::vector<std::uint8_t> payload;

  bool operator==(const WireMessage&) const = default;
};

enum class DecodeFault { kTruncated, kUnsupportedVersion, kLengthMismatch, kUnknownKind, kBadPayload };

inline const char* fault_name(DecodeFault f) {
  switch (f) {
    case DecodeFault::kTruncated: return "truncated";
    case DecodeFault::kUnsupportedVersion: return "unsupported version";
    case DecodeFault::kLengthMismatch: return "length mismatch";
    case DecodeFault::kUnknownKind: return "unknown kind";
    case DecodeFault::kBadPayload: return "bad payload";
  }
  return "?";
}

class DecodeError : public std::runtime_error {
 public:
  DecodeError(DecodeFault f, const std::string& detail)
      : std::runtime_error(std::string(fault_name(f)) + (detail.empty() ? "" : ": " + detail)), fault_(f) {}
  DecodeFault fault() const { return fault_; }

 private:
  DecodeFault fault_;
};

// Big-endian writer/reader.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double d) {
    std::uint64_t u;
    std::memcpy(&u, &d, 8);
    u64(u);
  }
  void bytes(const std::vector<std::uint8_t>& b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t>& data() { return buf_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = n - 1; i >= 0; --i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(const std::uint8_t* p, std::size_t n, DecodeFault short_fault = DecodeFault::kTruncated)
      : p_(p), n_(n), fault_(short_fault) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() {
    const std::uint64_t u = u64();
    double d;
    std::memcpy(&d, &u, 8);
    return d;
  }
  std::size_t remaining() const { return n_ - off_; }
  const std::uint8_t* cursor() const { return p_ + off_; }
  void skip(std::size_t k) {
    need(k);
    off_ += k;
  }

 private:
  void need(std::size_t k) const {
    if (n_ - off_ < k) throw DecodeError(fault_, "need " + std::to_string(k) + " bytes, have " + std::to_string(n_ - off_));
  }
  std::uint64_t get(int k) {
    need(static_cast<std::size_t>(k));
    std::uint64_t v = 0;
    for (int i = 0; i < k; ++i) v = (v << 8) | p_[off_ + static_cast<std::size_t>(i)];
    off_ += static_cast<std::size_t>(k);
    return v;
  }
  const std::uint8_t* p_;
  std::size_t n_;
  std::size_t off_ = 0;
  DecodeFault fault_;
};

inline constexpr std::size_t kHeaderBytes = 1 + 1 + 4 + 8 + 4;

// Frame: u32 body length, then version, kind, agent_id, epoch, payload_len, payload.
inline std::vector<std::uint8_t> encode_msg(const WireMessage& m) {
  if (m.payload.size() > 0xffffffffu - kHeaderBytes) throw std::length_error("payload too large");
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(kHeaderBytes + m.payload.size()));
  w.u8(m.version);
  w.u8(static_cast<std::uint8_t>(m.kind));
  w.u32(m.agent_id);
  w.u64(m.epoch);
  w.u32(static_cast<std::uint32_t>(m.payload.size()));
  w.bytes(m.payload);
  return std::move(w.data());
}

// Decodes exactly one frame occupying all of `frame`.
inline WireMessage decode_msg(const std::vector<std::uint8_t>& frame) {
  ByteReader r(frame.data(), frame.size());
  const std::uint32_t body = r.u32();
  if (r.remaining() < body) throw DecodeError(DecodeFault::kTruncated, "frame body cut short");
  if (r.remaining() > body) throw DecodeError(DecodeFault::kLengthMismatch, "trailing bytes after frame");
  if (body < kHeaderBytes) throw DecodeError(DecodeFault::kLengthMismatch, "frame shorter than header");
  WireMessage m;
  m.version = r.u8();
  if (m.version != kWireVersion) throw DecodeError(DecodeFault::kUnsupportedVersion, std::to_string(m.version));
  const std::uint8_t kind = r.u8();
  if (kind < 1 || kind > 5) throw DecodeError(DecodeFault::kUnknownKind, std::to_string(kind));
  m.kind = static_cast<MsgKind>(kind);
  m.agent_id = r.u32();
  m.epoch = r.u64();
  const std::uint32_t plen = r.u32();
  if (plen != r.remaining()) throw DecodeError(DecodeFault::kLengthMismatch, "payload_len disagrees with frame");
  m.payload.assign(r.cursor(), r.cursor() + plen);
  return m;
}

// Length of the frame at the start of `buf`, or 0 if incomplete.
inline std::size_t frame_length(const std::uint8_t* buf, std::size_t n) {
  if (n < 4) return 0;
  const std::size_t body = (std::size_t{buf[0]} << 24) | (std::size_t{buf[1]} << 16) | (std::size_t{buf[2]} << 8) | buf[3];
  return n >= 4 + body ? 4 + body : 0;
}

// ---- payloads ----

struct HelloBody {
  std::vector<FlowId> flows;
  bool operator==(const HelloBody&) const = default;
};

struct ErrorBody {
  std::uint16_t code = 0;
  std::string text;
  bool operator==(const ErrorBody&) const = default;
};

inline std::vector<std::uint8_t> encode_hello(const HelloBody& b) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(b.flows.size()));
  for (auto f : b.flows) w.u32(f);
  return std::move(w.data());
}

inline HelloBody decode_hello(const std::vector<std::uint8_t>& p) {
  ByteReader r(p.data(), p.size(), DecodeFault::kBadPayload);
  HelloBody b;
  const std::uint32_t n = r.u32();
  if (static_cast<std::uint64_t>(n) * 4 != r.remaining()) throw DecodeError(DecodeFault::kBadPayload, "hello flow count");
  for (std::uint32_t i = 0; i < n; ++i) b.flows.push_back(r.u32());
  return b;
}

inline std::vector<std::uint8_t> encode_params(const env::Windows& w) {
  ByteWriter b;
  b.u32(w.rt_ms);
  b.u32(w.bw_rounds);
  return std::move(b.data());
}

inline env::Windows decode_params(const std::vector<std::uint8_t>& p) {
  if (p.size() != 8) throw DecodeError(DecodeFault::kBadPayload, "params payload must be 8 bytes");
  ByteReader r(p.data(), p.size(), DecodeFault::kBadPayload);
  env::Windows w;
  w.rt_ms = r.u32();
  w.bw_rounds = r.u32();
  return w;
}

inline std::vector<std::uint8_t> encode_error(const ErrorBody& e) {
  ByteWriter w;
  w.u16(e.code);
  w.u32(static_cast<std::uint32_t>(e.text.size()));
  for (char c : e.text) w.u8(static_cast<std::uint8_t>(c));
  return std::move(w.data());
}

inline ErrorBody decode_error(const std::vector<std::uint8_t>& p) {
  ByteReader r(p.data(), p.size(), DecodeFault::kBadPayload);
  ErrorBody e;
  e.code = r.u16();
  const std::uint32_t n = r.u32();
  if (n != r.remaining()) throw DecodeError(DecodeFault::kBadPayload, "error text length");
  e.text.assign(reinterpret_cast<const char*>(r.cursor()), n);
  return e;
}

// STATS: rows, cols, row-major f64 features, flow ids, then the interval
// aggregates and the per-tick series. Doubles travel as raw IEEE bits.
inline std::vector<std::uint8_t> encode_stats(const StatsReport& s) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(s.rows.size()));
  w.u32(static_cast<std::uint32_t>(env::kNumFeatures));
  for (const auto& row : s.rows)
    for (double v : row.f) w.f64(v);
  for (const auto& row : s.rows) w.u32(row.flow_id);
  w.u64(static_cast<std::uint64_t>(s.now));
  w.u64(s.interval.samples);
  w.f64(s.interval.mean_throughput_bps);
  w.f64(s.interval.mean_abs_error_us);
  w.u32(s.windows.rt_ms);
  w.u32(s.windows.bw_rounds);
  w.u32(s.rejected);
  w.u32(static_cast<std::uint32_t>(s.series.size()));
  for (const auto& p : s.series) {
    w.f64(p.throughput_bps);
    w.f64(p.rtt_s);
    w.f64(p.latency_s);
    w.f64(p.latency_estimate_s);
  }
  return std::move(w.data());
}

inline StatsReport decode_stats(const WireMessage& m) {
  const auto& p = m.payload;
  ByteReader r(p.data(), p.size(), DecodeFault::kBadPayload);
  StatsReport s;
  s.agent_id = m.agent_id;
  s.epoch = m.epoch;
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  if (cols != env::kNumFeatures) throw DecodeError(DecodeFault::kBadPayload, "stats column count");
  if (static_cast<std::uint64_t>(rows) * (cols * 8 + 4) > r.remaining())
    throw DecodeError(DecodeFault::kBadPayload, "stats row count");
  s.rows.resize(rows);
  for (auto& row : s.rows)
    for (double& v : row.f) v = r.f64();
  for (auto& row : s.rows) row.flow_id = r.u32();
  s.now = static_cast<SimTime>(r.u64());
  s.interval.samples = r.u64();
  s.interval.mean_throughput_bps = r.f64();
  s.interval.mean_abs_error_us = r.f64();
  s.windows.rt_ms = r.u32();
  s.windows.bw_rounds = r.u32();
  s.rejected = r.u32();
  const std::uint32_t n = r.u32();
  if (static_cast<std::uint64_t>(n) * 32 != r.remaining()) throw DecodeError(DecodeFault::kBadPayload, "stats series length");
  s.series.resize(n);
  for (auto& q : s.series) {
    q.throughput_bps = r.f64();
    q.rtt_s = r.f64();
    q.latency_s = r.f64();
    q.latency_estimate_s = r.f64();
  }
  return s;
}

// Full structural check of a message, including its kind-specific payload.
inline WireMessage decode_checked(const std::vector<std::uint8_t>& frame) {
  WireMessage m = decode_msg(frame);
  switch (m.kind) {
    case MsgKind::kHello: decode_hello(m.payload); break;
    case MsgKind::kStats: decode_stats(m); break;
    case MsgKind::kParams: decode_params(m.payload); break;
    case MsgKind::kAck:
      if (!m.payload.empty()) throw DecodeError(DecodeFault::kBadPayload, "ack carries no payload");
      break;
    case MsgKind::kError: decode_error(m.payload); break;
  }
  return m;
}

}  // namespace bbrtune::agents
