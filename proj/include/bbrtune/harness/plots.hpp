#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "bbrtune/harness/metrics.hpp"
#include "bbrtune/harness/svg.hpp"
#include "bbrtune/netsim/trace.hpp"

namespace bbrtune::harness {

// Renders the standard figure set for one run; returns the written paths.
inline std::vector<std::string> emit_plots(const MetricsReport& r, const netsim::TraceLog& trace,
                                           const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> out;
  auto emit = [&](const std::string& name, const PlotSpec& spec, const std::vector<Series>& s) {
    const auto p = (dir / name).string();
    write_svg(p, spec, s);
    out.push_back(p);
  };

  std::map<FlowId, Series> thr, btl, srtt, est;
  Series truth{"true min RTT", {}, true};
  SimTime last_truth = -1;
  for (const auto& row : trace.rows) {
    const double t = to_seconds(row.time_us);
    const auto& s = row.stats;
    const std::string id = std::to_string(s.flow_id);
    auto init = [&](std::map<FlowId, Series>& m, const std::string& label) -> Series& {
      auto& e = m[s.flow_id];
      if (e.label.empty()) e.label = label + " " + id;
      return e;
    };
    init(thr, "throughput").points.emplace_back(t, s.delivery_rate_bps * 1e-6);
    init(btl, "BtlBw").points.emplace_back(t, s.bbr.btlbw_bps * 1e-6);
    init(srtt, "sRTT").points.emplace_back(t, s.srtt_us * 1e-3);
    init(est, "RTprop").points.emplace_back(t, s.bbr.rtprop_us * 1e-3);
    if (row.time_us != last_truth) {
      truth.points.emplace_back(t, s.true_min_rtt_us * 1e-3);
      last_truth = row.time_us;
    }
  }
  auto spec = [](const std::string& title, const std::string& x, const std::string& y) {
    PlotSpec p;
    p.title = title;
    p.x_label = x;
    p.y_label = y;
    return p;
  };
  auto values = [](std::map<FlowId, Series>& m) {
    std::vector<Series> v;
    for (auto& [k, s] : m) v.push_back(std::move(s));
    return v;
  };

  auto rate = values(thr);
  for (auto& s : values(btl)) rate.push_back(std::move(s));
  emit("throughput.svg", spec(r.scenario + ": throughput", "time (s)", "Mbps"), rate);

  auto rtt = values(srtt);
  for (auto& s : values(est)) rtt.push_back(std::move(s));
  rtt.push_back(truth);
  emit("rtt.svg", spec(r.scenario + ": RTT", "time (s)", "ms"), rtt);

  auto cdf = spec(r.scenario + ": squared RTprop error CDF", "squared error (ms^2)", "CDF");
  cdf.y_range = {0.0, 1.0};
  emit("cdf_sq_error.svg", cdf, {{"sq error", r.sq_error_cdf, true}});

  cdf.title = r.scenario + ": throughput CDF";
  cdf.x_label = "throughput (bps)";
  emit("cdf_throughput.svg", cdf, {{"throughput", r.throughput_cdf, true}});

  emit("reward.svg", spec(r.scenario + ": reward", "time (s)", "reward"), {{"reward", r.reward_curve, false}});
  return out;
}

}  // namespace bbrtune::harness
