#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bbrtune/netsim/trace.hpp"

namespace bbrtune::harness {

using CdfPoints = std::vector<std::pair<double, double>>;

inline constexpr double kDefaultAccuracyThresholdUs2 = 5000.0 * 5000.0;  // (5 ms)^2
inline constexpr double kNeverConverged = std::numeric_limits<double>::infinity();

// Step CDF: x sorted ascending, y = (i+1)/n.
inline CdfPoints empirical_cdf(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  CdfPoints out;
  out.reserve(xs.size());
  const double n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out.emplace_back(xs[i], static_cast<double>(i + 1) / n);
  return out;
}

inline double squared_error_us2(const netsim::TraceRow& r) {
  const double e = r.stats.bbr.rtprop_us - r.stats.true_min_rtt_us;
  return e * e;
}

// Fraction of trace samples whose RTprop estimate is within the threshold of
// the true minimum RTT; samples without an estimate count as misses.
inline double estimation_accuracy(const netsim::TraceLog& t, double threshold_us2 = kDefaultAccuracyThresholdUs2) {
  if (t.rows.empty()) throw std::invalid_argument("empty trace");
  std::size_t hit = 0;
  for (const auto& r : t.rows)
    if (r.stats.bbr.rtprop_us > 0 && squared_error_us2(r) <= threshold_us2) ++hit;
  return static_cast<double>(hit) / static_cast<double>(t.rows.size());
}

inline CdfPoints squared_error_cdf(const netsim::TraceLog& t) {
  std::vector<double> xs;
  for (const auto& r : t.rows)
    if (r.stats.bbr.rtprop_us > 0) xs.push_back(squared_error_us2(r) * 1e-6);  // ms^2
  return empirical_cdf(xs);
}

inline CdfPoints throughput_cdf(const netsim::TraceLog& t) {
  std::vector<double> xs;
  for (const auto& r : t.rows) xs.push_back(r.stats.delivery_rate_bps);
  return empirical_cdf(xs);
}

inline double peak_rtt_us(const netsim::TraceLog& t) {
  double m = 0;
  for (const auto& r : t.rows) m = std::max(m, r.stats.srtt_us);
  return m;
}

inline double mean_throughput_bps(const netsim::TraceLog& t) {
  if (t.rows.empty()) return 0.0;
  std::map<SimTime, double> per_time;
  for (const auto& r : t.rows) per_time[r.time_us] += r.stats.delivery_rate_bps;
  double s = 0;
  for (const auto& [k, v] : per_time) s += v;
  return s / static_cast<double>(per_time.size());
}

// Per-time view of the trace: flow -> throughput, smoothed per flow by a
// trailing moving average over `smoothing`.
inline std::map<SimTime, std::map<FlowId, double>> smoothed_throughput(const netsim::TraceLog& t, SimTime smoothing) {
  std::map<FlowId, std::vector<std::pair<SimTime, double>>> per_flow;
  for (const auto& r : t.rows) per_flow[r.stats.flow_id].emplace_back(r.time_us, r.stats.delivery_rate_bps);
  std::map<SimTime, std::map<FlowId, double>> out;
  for (const auto& [id, series] : per_flow) {
    std::size_t lo = 0;
    double sum = 0;
    for (std::size_t i = 0; i < series.size(); ++i) {
      sum += series[i].second;
      while (series[i].first - series[lo].first >= smoothing && lo < i) sum -= series[lo++].second;
      out[series[i].first][id] = sum / static_cast<double>(i - lo + 1);
    }
  }
  return out;
}

// For each event time: delay until every active flow stays within +-tol of
// capacity/n for at least `hold`. kNeverConverged if that never happens.
inline std::vector<double> convergence_times(const netsim::TraceLog& t, const std::vector<SimTime>& events,
                                             double capacity_bps, double tol = 0.10, SimTime hold = 2 * kUsPerSec,
                                             SimTime smoothing = kUsPerSec) {
  const auto view = smoothed_throughput(t, smoothing);
  std::vector<std::pair<SimTime, bool>> fair;
  for (const auto& [time, flows] : view) {
    const double share = capacity_bps / static_cast<double>(flows.size());
    bool ok = true;
    for (const auto& [id, thr] : flows) ok = ok && std::abs(thr - share) <= tol * share;
    fair.emplace_back(time, ok);
  }
  std::vector<double> out;
  for (SimTime e : events) {
    double result = kNeverConverged;
    std::optional<SimTime> run_start;
    for (const auto& [time, ok] : fair) {
      if (time < e) continue;
      if (!ok) {
        run_start.reset();
        continue;
      }
      if (!run_start) run_start = time;
      if (time - *run_start >= hold) {
        result = to_seconds(*run_start - e);
        break;
      }
    }
    out.push_back(result);
  }
  return out;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct MetricsReport {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string mode;  // vanilla | checkpoint path
  double threshold_us2 = kDefaultAccuracyThresholdUs2;
  double accuracy = 0;
  double peak_rtt_us = 0;
  double mean_throughput_bps = 0;
  double mean_reward = 0;
  std::vector<double> event_times_s;
  std::vector<double> convergence_s;
  CdfPoints sq_error_cdf;
  CdfPoints throughput_cdf;
  std::vector<std::pair<double, double>> reward_curve;

  double median_convergence_s() const { return median(convergence_s); }
};

inline void write_report_csv(std::ostream& os, const MetricsReport& r) {
  os << "section,key,x,y\n";
  os << "meta,scenario," << r.scenario << ",0\n";
  os << "meta,seed," << r.seed << ",0\n";
  os << "meta,mode," << r.mode << ",0\n";
  auto sum = [&](const char* k, double v) { os << "summary," << k << ",0," << fmt_double(v) << '\n'; };
  sum("threshold_us2", r.threshold_us2);
  sum("accuracy", r.accuracy);
  sum("peak_rtt_us", r.peak_rtt_us);
  sum("mean_throughput_bps", r.mean_throughput_bps);
  sum("mean_reward", r.mean_reward);
  sum("median_convergence_s", r.median_convergence_s());
  for (std::size_t i = 0; i < r.convergence_s.size(); ++i)
    os << "convergence," << i << ',' << fmt_double(r.event_times_s[i]) << ',' << fmt_double(r.convergence_s[i]) << '\n';
  for (const auto& [x, y] : r.sq_error_cdf) os << "cdf_sq_error_ms2,," << fmt_double(x) << ',' << fmt_double(y) << '\n';
  for (const auto& [x, y] : r.throughput_cdf) os << "cdf_throughput_bps,," << fmt_double(x) << ',' << fmt_double(y) << '\n';
  for (const auto& [x, y] : r.reward_curve) os << "reward,," << fmt_double(x) << ',' << fmt_double(y) << '\n';
}

inline double parse_metric(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
  return parse_double(s);
}

inline MetricsReport read_report_csv(std::istream& is) {
  MetricsReport r;
  std::string line;
  if (!std::getline(is, line) || line.rfind("section,key,x,y", 0) != 0) throw std::runtime_error("not a metrics report");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 4) throw std::runtime_error("bad report row: " + line);
    const auto& sec = f[0];
    const auto& key = f[1];
    if (sec == "meta") {
      if (key == "scenario") r.scenario = f[2];
      else if (key == "seed") r.seed = std::stoull(f[2]);
      else if (key == "mode") r.mode = f[2];
    } else if (sec == "summary") {
      const double v = parse_metric(f[3]);
      if (key == "threshold_us2") r.threshold_us2 = v;
      else if (key == "accuracy") r.accuracy = v;
      else if (key == "peak_rtt_us") r.peak_rtt_us = v;
      else if (key == "mean_throughput_bps") r.mean_throughput_bps = v;
      else if (key == "mean_reward") r.mean_reward = v;
    } else if (sec == "convergence") {
      r.event_times_s.push_back(parse_metric(f[2]));
      r.convergence_s.push_back(parse_metric(f[3]));
    } else if (sec == "cdf_sq_error_ms2") {
      r.sq_error_cdf.emplace_back(parse_metric(f[2]), parse_metric(f[3]));
    } else if (sec == "cdf_throughput_bps") {
      r.throughput_cdf.emplace_back(parse_metric(f[2]), parse_metric(f[3]));
    } else if (sec == "reward") {
      r.reward_curve.emplace_back(parse_metric(f[2]), parse_metric(f[3]));
    }
  }
  return r;
}

inline MetricsReport read_report_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  return read_report_csv(f);
}

struct ComparisonRow {
  std::string metric;
  double a = 0, b = 0;
  double ratio = 0;  // a/b for times (speedup); b/a otherwise
  double delta = 0;  // b - a
};

// A is the baseline, B the candidate.
inline std::vector<ComparisonRow> compare_reports(const MetricsReport& a, const MetricsReport& b) {
  if (a.scenario != b.scenario || a.seed != b.seed)
    throw std::invalid_argument("reports come from different scenarios (" + a.scenario + "/" + std::to_string(a.seed) +
                                " vs " + b.scenario + "/" + std::to_string(b.seed) + ")");
  auto ratio = [](double num, double den) {
    if (num == den) return 1.0;
    return den != 0 ? num / den : std::numeric_limits<double>::infinity();
  };
  std::vector<ComparisonRow> rows;
  const double ca = a.median_convergence_s(), cb = b.median_convergence_s();
  rows.push_back({"median_convergence_s", ca, cb, ratio(ca, cb), cb - ca});
  rows.push_back({"peak_rtt_us", a.peak_rtt_us, b.peak_rtt_us, ratio(b.peak_rtt_us, a.peak_rtt_us),
                  b.peak_rtt_us - a.peak_rtt_us});
  rows.push_back({"accuracy", a.accuracy, b.accuracy, ratio(b.accuracy, a.accuracy), b.accuracy - a.accuracy});
  rows.push_back({"mean_throughput_bps", a.mean_throughput_bps, b.mean_throughput_bps,
                  ratio(b.mean_throughput_bps, a.mean_throughput_bps), b.mean_throughput_bps - a.mean_throughput_bps});
  return rows;
}

inline double convergence_speedup(const std::vector<ComparisonRow>& rows) { return rows.at(0).ratio; }
inline double peak_rtt_reduction(const std::vector<ComparisonRow>& rows) { return 1.0 - rows.at(1).ratio; }

inline void write_comparison_csv(std::ostream& os, const std::vector<ComparisonRow>& rows) {
  os << "metric,a,b,ratio,delta\n";
  for (const auto& r : rows)
    os << r.metric << ',' << fmt_double(r.a) << ',' << fmt_double(r.b) << ',' << fmt_double(r.ratio) << ','
       << fmt_double(r.delta) << '\n';
}

}  // namespace bbrtune::harness
