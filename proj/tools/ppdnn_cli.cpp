// Command-line front end: trace generation, simulation runs, metrics.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "ppdnn/ppdnn.hpp"

namespace fs = std::filesystem;
using namespace ppdnn;

namespace {

struct UsageError : Error {
  using Error::Error;
};

// Binary (P5) or ASCII (P2) greymap, rescaled to 0..255.
GrayImage read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open image '" + path + "'");
  auto token = [&]() {
    std::string t;
    while (is >> t) {
      if (t[0] != '#') return t;
      std::string rest;
      std::getline(is, rest);
    }
    throw ValidationError(path + ": truncated PGM header");
  };
  const std::string magic = token();
  if (magic != "P5" && magic != "P2") throw ValidationError(path + ": not a PGM file (P2/P5)");
  GrayImage img;
  int maxval = 0;
  try {
    img.width = std::stoi(token());
    img.height = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::logic_error&) {
    throw ValidationError(path + ": malformed PGM header");
  }
  if (img.width < 1 || img.height < 1 || maxval < 1 || maxval > 255) throw ValidationError(path + ": unsupported PGM");
  const auto n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  img.pixels.resize(n);
  const double scale = 255.0 / maxval;
  if (magic == "P5") {
    is.get();
    std::vector<unsigned char> raw(n);
    if (!is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n)))
      throw ValidationError(path + ": truncated pixel data");
    for (std::size_t i = 0; i < n; ++i) img.pixels[i] = raw[i] * scale;
  } else {
    for (std::size_t i = 0; i < n; ++i) img.pixels[i] = std::stoi(token()) * scale;
  }
  return img;
}

// Config file (flag or PPDNN_CONFIG) first, then --set overrides.
SimConfig load_config(const std::string& config_path, const std::vector<std::string>& overrides) {
  SimConfig cfg;
  std::string path = config_path;
  if (path.empty())
    if (const char* env = std::getenv("PPDNN_CONFIG"); env && *env) path = env;
  if (!path.empty()) apply_settings(cfg, parse_settings_file(path));
  for (const std::string& s : overrides) {
    const auto [k, v] = parse_assignment(s);
    apply_setting(cfg, k, v);
  }
  return cfg;
}

std::string fmt(double v, int prec = 1) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

std::string fmt(const std::optional<double>& v, int prec = 3) { return v ? fmt(*v, prec) : "-"; }

void print_summary(const MetricsSummary& m) {
  std::cout << "mode " << m.mode << ": frames " << m.frame_count << ", bundles " << m.bundles << " ("
            << fmt(m.fusion_percent()) << "%)";
  if (m.delay) std::cout << ", mean delay " << fmt(m.delay->mean) << " ms";
  if (m.avg_dc) std::cout << ", avg d_c " << fmt(*m.avg_dc, 3);
  if (m.cost_effectiveness) std::cout << ", cost-effectiveness " << fmt(*m.cost_effectiveness);
  std::cout << '\n';
}

int cmd_gen_trace(const std::string& scenario, const std::string& script, std::uint64_t seed, double fps,
                  std::optional<double> duration, const std::string& out) {
  ScenarioScript s;
  if (!script.empty()) {
    std::ifstream is(script);
    if (!is) throw ValidationError("cannot open scenario script '" + script + "'");
    try {
      s = scenario_from_json(nlohmann::json::parse(is));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(script + ": " + e.what());
    }
  } else {
    bool known = false;
    for (auto n : kBuiltinScenarios) known = known || n == scenario;
    if (!known) {
      std::string names;
      for (auto n : kBuiltinScenarios) names += (names.empty() ? "" : ", ") + std::string(n);
      throw UsageError("unknown scenario '" + scenario + "'; valid names: " + names);
    }
    s = builtin_scenario(scenario, seed, fps);
  }
  s.fps = fps;
  if (duration) s.duration_s = *duration;
  const Trace t = generate(s, seed);
  write_trace_file(out, t);
  std::cout << "wrote " << out << ": " << t.frames.size() << " frames at " << t.header.fps << " fps\n";
  return 0;
}

int cmd_run(const std::string& mode, const std::string& trace_path, std::optional<std::uint64_t> seed,
            const std::string& config, const std::vector<std::string>& sets, const std::string& out, int jobs) {
  SimConfig base = load_config(config, sets);
  if (seed) base.seed = *seed;
  std::vector<Mode> modes;
  if (mode == "all") modes.assign(kAllModes.begin(), kAllModes.end());
  else if (!mode.empty()) modes.push_back(mode_from_string(mode));
  else modes.push_back(base.mode);
  for (Mode m : modes) {
    SimConfig c = base;
    c.mode = m;
    c.validate();
  }

  const Trace trace = read_trace_file(trace_path);
  std::vector<std::optional<SimReport>> reports(modes.size());
  std::vector<std::exception_ptr> errors(modes.size());
  auto work = [&](std::size_t i) {
    try {
      SimConfig c = base;
      c.mode = modes[i];
      reports[i] = run(trace, c);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const auto width = static_cast<std::size_t>(std::max(1, jobs));
  for (std::size_t start = 0; start < modes.size(); start += width) {
    std::vector<std::thread> pool;
    for (std::size_t i = start; i < std::min(modes.size(), start + width); ++i) pool.emplace_back(work, i);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (std::size_t i = 0; i < modes.size(); ++i) {
    const fs::path dir = modes.size() == 1 ? fs::path(out) : fs::path(out) / std::string(to_string(modes[i]));
    write_report(dir, *reports[i]);
    print_summary(compute_metrics(run_data(*reports[i]), &trace));
    std::cout << "  report: " << dir.string() << '\n';
  }
  return 0;
}

int cmd_evaluate(const std::string& report_dir, const std::string& trace_path, const std::string& advance) {
  const AdvancePolicy policy = advance == "catch_up" ? AdvancePolicy::catch_up : AdvancePolicy::single_step;
  const RunData run = read_run_dir(report_dir);
  const Trace trace = read_trace_file(trace_path);
  if (hex64(fnv1a64(trace_to_string(trace))) != run.trace_hash)
    std::cerr << "warning: trace does not match the one recorded in " << report_dir << '\n';
  const MetricsSummary m = compute_metrics(run, &trace, policy);
  write_metrics(report_dir, m, run);
  print_summary(m);
  return 0;
}

int cmd_report(const std::vector<std::string>& dirs, const std::string& trace_path, const std::string& json_out) {
  std::optional<Trace> trace;
  if (!trace_path.empty()) trace = read_trace_file(trace_path);
  std::vector<MetricsSummary> cols;
  for (const std::string& d : dirs) cols.push_back(compute_metrics(read_run_dir(d), trace ? &*trace : nullptr));

  for (std::size_t i = 1; i < cols.size(); ++i)
    if (cols[i].trace_hash != cols[0].trace_hash)
      std::cerr << "warning: " << dirs[i] << " was produced from a different trace than " << dirs[0] << '\n';

  const MetricsSummary* baseline = nullptr;
  for (const MetricsSummary& m : cols)
    if (m.mode == "baseline") baseline = &m;

  std::vector<std::pair<std::string, std::vector<std::string>>> rows;
  auto row = [&](const std::string& name, auto&& cell) {
    std::vector<std::string> cells;
    for (const MetricsSummary& m : cols) cells.push_back(cell(m));
    rows.emplace_back(name, std::move(cells));
  };
  auto delay = [](double DelayStats::*f) {
    return [f](const MetricsSummary& m) { return m.delay ? fmt((*m.delay).*f) : std::string("-"); };
  };
  row("frames", [](const MetricsSummary& m) { return std::to_string(m.frame_count); });
  for (TaskId t : kAllTasks)
    row("processed." + std::string(to_string(t)),
        [t](const MetricsSummary& m) { return std::to_string(m.processed[index_of(t)]); });
  row("fusion.bundles", [](const MetricsSummary& m) { return std::to_string(m.bundles); });
  row("fusion.percent", [](const MetricsSummary& m) { return fmt(m.fusion_percent()); });
  row("delay.mean_ms", delay(&DelayStats::mean));
  row("delay.p50_ms", delay(&DelayStats::p50));
  row("delay.p99_ms", delay(&DelayStats::p99));
  row("delay.min_ms", delay(&DelayStats::min));
  row("delay.max_ms", delay(&DelayStats::max));
  row("delay.range_ms", delay(&DelayStats::range));
  if (baseline && baseline->delay)
    row("speedup_vs_baseline", [&](const MetricsSummary& m) {
      return m.delay && m.delay->mean > 0 ? fmt(baseline->delay->mean / m.delay->mean, 2) : std::string("-");
    });
  for (TaskId t : kAllTasks)
    row("d_c." + std::string(to_string(t)), [t](const MetricsSummary& m) { return fmt(m.dc[index_of(t)]); });
  row("d_c.avg", [](const MetricsSummary& m) { return fmt(m.avg_dc); });
  row("cost_effectiveness", [](const MetricsSummary& m) { return fmt(m.cost_effectiveness, 1); });
  row("cost_effectiveness_s", [](const MetricsSummary& m) {
    return m.cost_effectiveness ? fmt(*m.cost_effectiveness * kCostEffectivenessDisplayScale, 3) : std::string("-");
  });

  std::size_t w0 = 6;
  for (const auto& r : rows) w0 = std::max(w0, r.first.size());
  std::vector<std::size_t> w(cols.size(), 8);
  for (std::size_t i = 0; i < cols.size(); ++i) {
    w[i] = std::max(w[i], cols[i].mode.size());
    for (const auto& r : rows) w[i] = std::max(w[i], r.second[i].size());
  }
  std::cout << std::left << std::setw(static_cast<int>(w0)) << "metric";
  for (std::size_t i = 0; i < cols.size(); ++i) std::cout << "  " << std::right << std::setw(static_cast<int>(w[i])) << cols[i].mode;
  std::cout << '\n';
  for (const auto& r : rows) {
    std::cout << std::left << std::setw(static_cast<int>(w0)) << r.first;
    for (std::size_t i = 0; i < cols.size(); ++i) std::cout << "  " << std::right << std::setw(static_cast<int>(w[i])) << r.second[i];
    std::cout << '\n';
  }

  if (!json_out.empty()) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const MetricsSummary& m : cols) j.push_back(to_json(m));
    std::ofstream os(json_out, std::ios::binary);
    if (!os) throw ValidationError("cannot write " + json_out);
    os << j.dump(2) << '\n';
  }
  return 0;
}

int cmd_ssim_check(const std::string& a, const std::string& b) {
  const Thumbnail ta = make_thumbnail(read_pgm(a));
  const Thumbnail tb = make_thumbnail(read_pgm(b));
  std::cout << std::setprecision(9) << ssim(ta, tb) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perception control-plane simulator"};
  app.require_subcommand(1);

  std::string scenario, script, out;
  std::uint64_t gen_seed = 0;
  double fps = 30.0;
  std::optional<double> duration;
  auto* gen = app.add_subcommand("gen-trace", "Generate a synthetic trace");
  auto* scen_opt = gen->add_option("--scenario", scenario, "Built-in scenario (highway, downtown, crossing, signal_stop)");
  gen->add_option("--script", script, "Scenario script (JSON)")->excludes(scen_opt);
  gen->add_option("--seed", gen_seed, "Random seed")->default_val(0);
  gen->add_option("--fps", fps, "Frame rate")->default_val(30.0)->check(CLI::PositiveNumber);
  gen->add_option("--duration", duration, "Override duration, seconds");
  gen->add_option("--out", out, "Output .pptrace file")->required();

  std::string mode, trace_path, config, run_out;
  std::optional<std::uint64_t> run_seed;
  std::vector<std::string> sets;
  int jobs = 1;
  auto* runc = app.add_subcommand("run", "Simulate one mode (or all) over a trace");
  runc->add_option("--mode", mode, "baseline, fd, fd_fg, fd_dp, ppdnn or all");
  runc->add_option("--trace", trace_path, "Input trace")->required();
  runc->add_option("--seed", run_seed, "Random seed (default 0)");
  runc->add_option("--config", config, "Config file (default: $PPDNN_CONFIG)");
  runc->add_option("--set", sets, "Override a config key, key=value (repeatable)");
  runc->add_option("--out", run_out, "Report directory")->required();
  runc->add_option("--jobs", jobs, "Modes simulated in parallel with --mode all")->default_val(1);

  std::string eval_dir, eval_trace, advance = "single_step";
  auto* evalc = app.add_subcommand("evaluate", "Compute metrics for a report directory");
  evalc->add_option("--report", eval_dir, "Report directory")->required();
  evalc->add_option("--trace", eval_trace, "Trace the report was produced from")->required();
  evalc->add_option("--advance", advance, "Keyframe cursor policy")->check(CLI::IsMember({"single_step", "catch_up"}));

  std::vector<std::string> report_dirs;
  std::string report_trace, report_json;
  auto* reportc = app.add_subcommand("report", "Side-by-side metrics of report directories");
  reportc->add_option("dirs", report_dirs, "Report directories")->required();
  reportc->add_option("--trace", report_trace, "Trace, enables completeness metrics");
  reportc->add_option("--json", report_json, "Also write the table as JSON");

  std::string img_a, img_b;
  auto* ssimc = app.add_subcommand("ssim-check", "SSIM between the thumbnails of two PGM images");
  ssimc->add_option("a", img_a)->required();
  ssimc->add_option("b", img_b)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      if (scenario.empty() && script.empty()) throw UsageError("gen-trace needs --scenario or --script");
      return cmd_gen_trace(scenario, script, gen_seed, fps, duration, out);
    }
    if (*runc) return cmd_run(mode, trace_path, run_seed, config, sets, run_out, jobs);
    if (*evalc) return cmd_evaluate(eval_dir, eval_trace, advance);
    if (*reportc) return cmd_report(report_dirs, report_trace, report_json);
    if (*ssimc) return cmd_ssim_check(img_a, img_b);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const InvariantError& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
  return 1;
}
