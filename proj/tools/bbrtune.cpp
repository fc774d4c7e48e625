#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bbrtune/harness/runner.hpp"
#include "bbrtune/version.hpp"

namespace {

using namespace bbrtune;
using harness::ConfigError;

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Common {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string transport = "mem";
  std::optional<std::size_t> agents;
  std::string manifest;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--scenario", c.scenario, "Scenario file (JSON)");
  app->add_option("--seed", c.seed, "Seed (defaults to the scenario seed)");
  app->add_option("--out", c.out, "Output directory")->required();
  app->add_option("--transport", c.transport, "Host/RL transport")->check(CLI::IsMember({"mem", "tcp"}));
  app->add_option("--agents", c.agents, "Number of RL agents (overrides the scenario)");
  app->add_option("--manifest", c.manifest, "Replay the run described by a manifest");
}

harness::ScenarioSpec load_spec(const Common& c) {
  if (c.scenario.empty()) throw ConfigError("--scenario is required");
  auto spec = harness::load_scenario(c.scenario);
  if (c.agents) spec.agents.count = *c.agents;
  harness::validate(spec);
  return spec;
}

void print_stats(const rl::IterationStats& s) {
  std::fprintf(stderr, "iter %4zu  reward %.4f  clip %.3f  entropy %.3f  vloss %.4f  kl %.5f\n", s.iteration,
               s.mean_reward, s.clip_fraction, s.entropy, s.value_loss, s.approx_kl);
}

int cmd_train(const Common& c, std::optional<std::size_t> iters, const std::vector<std::string>& overrides,
              bool quiet) {
  harness::TrainOptions o;
  if (!c.manifest.empty()) {
    o = harness::train_options_from_manifest(harness::load_manifest(c.manifest));
  } else {
    o.spec = load_spec(c);
    o.seed = c.seed.value_or(o.spec.seed);
    o.transport = agents::parse_transport(c.transport);
    for (const auto& kv : overrides) o.hyper = harness::apply_hyper_override(o.hyper, kv);
    if (iters) o.iters = *iters;
  }
  o.out_dir = c.out;
  if (!quiet) o.on_iteration = print_stats;
  const auto res = harness::run_training(o);
  std::cout << "trained " << o.iters << " iterations; checkpoint " << (std::filesystem::path(c.out) / "checkpoint.bin").string()
            << '\n';
  if (!res.history.empty()) std::cout << "final mean reward " << res.history.back().mean_reward << '\n';
  return 0;
}

std::optional<env::Windows> parse_windows(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const auto f = split_csv_line(s);
  if (f.size() != 2) throw ConfigError("--windows takes RT_MS,ROUNDS");
  try {
    return env::Windows{static_cast<std::uint32_t>(std::stoul(f[0])), static_cast<std::uint32_t>(std::stoul(f[1]))};
  } catch (const std::logic_error&) {
    throw ConfigError("--windows takes RT_MS,ROUNDS");
  }
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& baseline, bool sample, bool online,
             double online_lr, std::optional<double> threshold_ms, bool no_plots, const std::string& windows) {
  harness::EvalOptions o;
  if (!c.manifest.empty()) {
    o = harness::eval_options_from_manifest(harness::load_manifest(c.manifest));
  } else {
    if (checkpoint.empty() == baseline.empty()) throw ConfigError("give exactly one of --checkpoint or --baseline");
    if (!baseline.empty() && baseline != "vanilla") throw ConfigError("--baseline must be vanilla");
    o.spec = load_spec(c);
    o.seed = c.seed.value_or(o.spec.seed);
    o.mode = baseline.empty() ? checkpoint : "vanilla";
    o.greedy = !sample;
    o.online = online;
    o.online_lr = online_lr;
    if (threshold_ms) o.threshold_us2 = (*threshold_ms * 1e3) * (*threshold_ms * 1e3);
    o.transport = agents::parse_transport(c.transport);
    o.forced_windows = parse_windows(windows);
    if (o.forced_windows && o.mode == "vanilla") throw ConfigError("--windows needs --checkpoint");
  }
  o.out_dir = c.out;
  o.plots = !no_plots;
  const auto res = harness::run_eval(o);
  const auto& r = res.report;
  std::cout << "scenario " << r.scenario << " seed " << r.seed << " mode " << r.mode << '\n'
            << "accuracy " << r.accuracy << '\n'
            << "peak_rtt_ms " << r.peak_rtt_us * 1e-3 << '\n'
            << "median_convergence_s " << r.median_convergence_s() << '\n'
            << "mean_reward " << r.mean_reward << '\n';
  return 0;
}

int cmd_compare(const std::string& a, const std::string& b, const std::string& out) {
  const auto ra = harness::read_report_csv(a);
  const auto rb = harness::read_report_csv(b);
  std::vector<harness::ComparisonRow> rows;
  try {
    rows = harness::compare_reports(ra, rb);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  std::printf("%-22s %14s %14s %10s %12s\n", "metric", "A", "B", "ratio", "delta");
  for (const auto& r : rows) std::printf("%-22s %14.6g %14.6g %10.4g %12.6g\n", r.metric.c_str(), r.a, r.b, r.ratio, r.delta);
  std::printf("convergence speedup %.3gx, peak RTT reduction %.1f%%, accuracy delta %+.1f pp\n",
              harness::convergence_speedup(rows), 100.0 * harness::peak_rtt_reduction(rows),
              100.0 * rows[2].delta);
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    std::ofstream f(std::filesystem::path(out) / "comparison.csv", std::ios::binary);
    harness::write_comparison_csv(f, rows);
  }
  return 0;
}

int cmd_plot(const std::string& report, const std::string& trace, const std::string& out) {
  const auto r = harness::read_report_csv(report);
  std::ifstream tf(trace);
  if (!tf) throw ConfigError("cannot open " + trace);
  const auto t = netsim::TraceLog::read_csv(tf);
  for (const auto& p : harness::emit_plots(r, t, out)) std::cout << p << '\n';
  return 0;
}

int cmd_validate(const std::vector<std::string>& files) {
  for (const auto& f : files) {
    const auto s = harness::load_scenario(f);
    std::cout << f << ": ok (" << s.name << ", " << s.duration_s << " s, hash " << harness::scenario_hash(s) << ")\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tune BBR filter windows with PPO in a packet-level simulator"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Common train_c, eval_c;
  std::optional<std::size_t> iters;
  std::vector<std::string> overrides;
  bool quiet = false;
  auto* train = app.add_subcommand("train", "Train a PPO policy on a scenario");
  add_common(train, train_c);
  train->add_option("--iters", iters, "PPO iterations (default 500)");
  train->add_option("--hyper", overrides, "Hyperparameter override key=value (repeatable)");
  train->add_flag("--quiet", quiet, "No per-iteration log");

  std::string checkpoint, baseline, windows;
  bool sample = false, online = false, no_plots = false;
  double online_lr = 1e-4;
  std::optional<double> threshold_ms;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint or vanilla BBR on a scenario");
  add_common(eval, eval_c);
  eval->add_option("--checkpoint", checkpoint, "Trained checkpoint");
  eval->add_option("--baseline", baseline, "Baseline instead of a checkpoint")->check(CLI::IsMember({"vanilla"}));
  eval->add_flag("--sample", sample, "Sample actions instead of taking the most likely one");
  eval->add_flag("--online", online, "Keep training during evaluation");
  eval->add_option("--online-lr", online_lr, "Learning rate for --online");
  eval->add_option("--threshold-ms", threshold_ms, "Accuracy threshold on |RTprop error| (default 5)");
  eval->add_flag("--no-plots", no_plots, "Skip SVG output");
  eval->add_option("--windows", windows, "Hold fixed windows RT_MS,ROUNDS instead of asking the policy");

  std::string rep_a, rep_b, cmp_out;
  auto* compare = app.add_subcommand("compare", "Compare two metrics reports (A = baseline)");
  compare->add_option("report_a", rep_a)->required()->check(CLI::ExistingFile);
  compare->add_option("report_b", rep_b)->required()->check(CLI::ExistingFile);
  compare->add_option("--out", cmp_out, "Write comparison.csv here");

  std::string plot_report, plot_trace, plot_out;
  auto* plot = app.add_subcommand("plot", "Render SVG plots from a report and trace");
  plot->add_option("--report", plot_report)->required()->check(CLI::ExistingFile);
  plot->add_option("--trace", plot_trace)->required()->check(CLI::ExistingFile);
  plot->add_option("--out", plot_out)->required();

  std::vector<std::string> scenario_files;
  auto* scenario = app.add_subcommand("scenario", "Scenario file utilities");
  scenario->require_subcommand(1);
  auto* validate = scenario->add_subcommand("validate", "Check scenario files against the schema");
  validate->add_option("files", scenario_files)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) return cmd_train(train_c, iters, overrides, quiet);
    if (*eval) return cmd_eval(eval_c, checkpoint, baseline, sample, online, online_lr, threshold_ms, no_plots, windows);
    if (*compare) return cmd_compare(rep_a, rep_b, cmp_out);
    if (*plot) return cmd_plot(plot_report, plot_trace, plot_out);
    if (*validate) return cmd_validate(scenario_files);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
