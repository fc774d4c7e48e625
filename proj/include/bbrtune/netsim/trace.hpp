#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bbrtune/netsim/types.hpp"

namespace bbrtune {

// Shortest round-trip decimal form; identical doubles always print identically.
inline std::string fmt_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw std::invalid_argument("bad number: '" + s + "'");
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace bbrtune

namespace bbrtune::netsim {

struct TraceRow {
  SimTime time_us = 0;
  FlowStats stats;
  std::int64_t queue_backlog_bytes = 0;
};

inline constexpr const char* kTraceHeader =
    "time_us,flow_id,delivery_rate_bps,srtt_us,loss_rate,cwnd_bytes,pacing_rate_bps,queue_backlog_bytes,"
    "btlbw_bps,rtprop_us,pacing_gain,cwnd_gain,phase,true_min_rtt_us,w_rt_s,w_bw_rounds,has_data";

struct TraceLog {
  std::vector<TraceRow> rows;

  bool empty() const { return rows.empty(); }
  void append(const TraceLog& other) { rows.insert(rows.end(), other.rows.begin(), other.rows.end()); }

  void write_csv(std::ostream& os) const {
    os << kTraceHeader << '\n';
    for (const auto& r : rows) {
      const auto& s = r.stats;
      os << r.time_us << ',' << s.flow_id << ',' << fmt_double(s.delivery_rate_bps) << ',' << fmt_double(s.srtt_us)
         << ',' << fmt_double(s.loss_rate) << ',' << fmt_double(s.cwnd_bytes) << ',' << fmt_double(s.pacing_rate_bps)
         << ',' << r.queue_backlog_bytes << ',' << fmt_double(s.bbr.btlbw_bps) << ',' << fmt_double(s.bbr.rtprop_us)
         << ',' << fmt_double(s.bbr.pacing_gain) << ',' << fmt_double(s.bbr.cwnd_gain) << ','
         << static_cast<int>(s.bbr.phase) << ',' << fmt_double(s.true_min_rtt_us) << ','
         << fmt_double(s.bbr.rtprop_window_s) << ',' << s.bbr.btlbw_window_rounds << ',' << (s.has_data ? 1 : 0)
         << '\n';
    }
  }

  void write_csv(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    write_csv(f);
  }

  std::string to_csv() const {
    std::ostringstream os;
    write_csv(os);
    return os.str();
  }

  static TraceLog read_csv(std::istream& is) {
    TraceLog log;
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("empty trace file");
    if (line.rfind("time_us,flow_id", 0) != 0) throw std::runtime_error("not a trace CSV");
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto f = split_csv_line(line);
      if (f.size() < 17) throw std::runtime_error("short trace row");
      TraceRow r;
      r.time_us = std::stoll(f[0]);
      auto& s = r.stats;
      s.flow_id = static_cast<FlowId>(std::stoul(f[1]));
      s.delivery_rate_bps = parse_double(f[2]);
      s.srtt_us = parse_double(f[3]);
      s.loss_rate = parse_double(f[4]);
      s.cwnd_bytes = parse_double(f[5]);
      s.pacing_rate_bps = parse_double(f[6]);
      r.queue_backlog_bytes = std::stoll(f[7]);
      s.bbr.btlbw_bps = parse_double(f[8]);
      s.bbr.rtprop_us = parse_double(f[9]);
      s.bbr.pacing_gain = parse_double(f[10]);
      s.bbr.cwnd_gain = parse_double(f[11]);
      s.bbr.phase = static_cast<bbr::Phase>(std::stoi(f[12]));
      s.true_min_rtt_us = parse_double(f[13]);
      s.bbr.rtprop_window_s = parse_double(f[14]);
      s.bbr.btlbw_window_rounds = static_cast<std::uint32_t>(std::stoul(f[15]));
      s.has_data = f[16] == "1";
      log.rows.push_back(r);
    }
    return log;
  }

  static TraceLog read_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    return read_csv(f);
  }
};

}  // namespace bbrtune::netsim
