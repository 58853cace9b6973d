// tslip: single runs, sweeps, damping/gain tuning, offline analysis and
// fixture regeneration.
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "tslip/config.hpp"
#include "tslip/io.hpp"
#include "tslip/plots.hpp"
#include "tslip/runner.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tslip;

namespace {

enum ExitCode { kOk = 0, kIoFailure = 1, kConfigFailure = 2, kSimulationFailure = 3,
                kNondeterministic = 4 };

struct Options {
  std::optional<std::string> config_path;
  std::optional<std::string> out;
  std::optional<double> vp_radius;
  std::optional<double> speed;
  std::optional<std::string> format;
  bool seedless{false};
  bool gains{false};
  std::string run_dir;
};

/// Failure that already carries its exit code.
struct CommandFailure : std::runtime_error {
  CommandFailure(ExitCode code, std::string kind, const std::string& what)
      : std::runtime_error(what), code(code), kind(std::move(kind)) {}
  ExitCode code;
  std::string kind;
};

int report(ExitCode code, const std::string& kind, const std::string& message,
           const json& extra = json::object()) {
  json err{{"error", kind}, {"message", message}, {"exit_code", code}};
  err.update(extra);
  std::cerr << err.dump() << '\n';
  return code;
}

RunConfig resolve_config(const Options& o) {
  RunConfig c = o.config_path ? load_config(*o.config_path) : default_config();
  if (o.vp_radius) {
    c.vp_radius = *o.vp_radius;
    c.vp_radii = {*o.vp_radius};
  }
  if (o.speed) {
    c.speed = *o.speed;
    c.speeds = {*o.speed};
  }
  if (o.format) c.output_format = parse_output_format(*o.format);
  c.validate();
  return c;
}

fs::path output_root(const Options& o, const RunConfig& c, const std::string& command) {
  if (o.out) return *o.out;
  if (c.output_directory) return *c.output_directory;
  const std::string leaf = command + "-" + config_hash(c).substr(0, 12);
  if (const char* env = std::getenv("TSLIP_OUT"); env && *env) return fs::path(env) / leaf;
  return fs::path("tslip-out") / leaf;
}

bool want_csv(const RunConfig& c) { return c.output_format != OutputFormat::plots; }
bool want_plots(const RunConfig& c) { return c.output_format != OutputFormat::csv; }

std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.*f", digits, v);
  return buf;
}

std::vector<StrideRecord> steady_copies(const GaitRun& run) {
  std::vector<StrideRecord> out;
  for (const StrideRecord* r : run.steady_strides()) out.push_back(*r);
  return out;
}

// --------------------------------------------------------------------------

void command_run(const RunConfig& config, OutputBundle& bundle) {
  const SingleRun run = execute_run(config);
  bundle.write_text("config.json", canonical_text(config));
  bundle.write_text("gait.json", gait_document(run).dump(2) + "\n");
  if (!run.gait.converged())
    throw CommandFailure(kSimulationFailure, "simulation",
                         run.gait.failure ? run.gait.failure->reason : "gait did not converge");
  const std::vector<StrideRecord> strides = steady_copies(run.gait);
  const auto rows = metrics_rows(strides, run.setup.model, config.angular_velocity_window);
  if (want_csv(config)) {
    write_timeseries(bundle, strides, "timeseries.csv");
    bundle.write_text("metrics.csv", write_csv(metrics_table(rows)));
  }
  if (want_plots(config)) {
    write_plot(bundle, "plots/pitch", pitch_trajectory_plot(strides));
    write_plot(bundle, "plots/grf", grf_overlay_plot(strides.back()));
    write_plot(bundle, "plots/energy", energy_timecourse_plot(strides.back()));
  }
}

std::string cell_dir(const SweepCell& c) {
  return "cells/r" + fixed(c.vp_radius, 2) + "_v" + fixed(c.speed, 1).substr(1);
}

void command_sweep(const RunConfig& config, OutputBundle& bundle, bool& all_converged) {
  SweepResult result = run_sweep(config.sweep_plan());
  result.config_hash = bundle.config_hash();
  bundle.write_text("config.json", canonical_text(config));
  bundle.write_text("summary.csv", write_csv(summary_table(result)));
  bundle.write_text("tuning.csv", write_csv(tuning_table(result)));
  if (want_csv(config)) {
    for (const SweepCell& c : result.cells) {
      if (!c.converged || !c.stride) continue;
      const std::vector<StrideRecord> one{*c.stride};
      ModelParamsd params = config.model;
      params.damping_coefficient = c.damping;
      write_timeseries(bundle, one, cell_dir(c) + "/timeseries.csv");
      bundle.write_text(cell_dir(c) + "/metrics.csv",
                        write_csv(metrics_table(
                            metrics_rows(one, params, config.angular_velocity_window))));
    }
  }
  if (want_plots(config)) {
    write_plot(bundle, "plots/excursion_vs_speed", excursion_speed_plot(result));
    write_plot(bundle, "plots/angular_velocity_vs_speed", angular_velocity_speed_plot(result));
    write_plot(bundle, "plots/peak_rate_vs_speed", peak_rate_speed_plot(result));
    write_plot(bundle, "plots/duty_factor_vs_speed",
               duty_factor_speed_plot(result, config.duty_factor));
    for (double v : result.speeds) {
      const std::string tag = "_v" + fixed(v, 1).substr(1);
      write_plot(bundle, "plots/pitch" + tag, pitch_comparison_plot(result, v));
      write_plot(bundle, "plots/hip_energy" + tag, energy_comparison_plot(result, v));
      write_plot(bundle, "plots/work" + tag, work_distribution_chart(result, v));
    }
  }
  all_converged = result.converged_count() == result.cells.size();
  std::cout << result.converged_count() << '/' << result.cells.size() << " cells converged\n";
}

void command_tune(const RunConfig& config, OutputBundle& bundle, bool gains) {
  bundle.write_text("config.json", canonical_text(config));
  if (gains) {
    const GainTuning t = tune_gains(config.sweep_plan(), config.gain_grid,
                                    config.gain_reference_speed);
    CsvTable table;
    table.columns = {"k_p", "k_d", "k_i", "k_xdot0", "k_xdot", "k_y", "failed_cells",
                     "strides_at_reference"};
    table.units = {"N·m/rad", "N·m·s/rad", "N·m/(rad·s)", "rad/(m/s)", "rad/(m/s)", "rad/m",
                   "-", "-"};
    for (const GainCandidate& g : t.candidates)
      table.rows.push_back({format_number(g.pid.k_p), format_number(g.pid.k_d),
                            format_number(g.pid.k_i), format_number(g.leg.k_xdot0),
                            format_number(g.leg.k_xdot), format_number(g.leg.k_y),
                            std::to_string(g.failed_cells),
                            std::to_string(g.strides_at_reference)});
    bundle.write_text("gains.csv", write_csv(table));
    const json best{{"k_p", t.best.pid.k_p},         {"k_d", t.best.pid.k_d},
                    {"k_i", t.best.pid.k_i},         {"k_xdot0", t.best.leg.k_xdot0},
                    {"k_xdot", t.best.leg.k_xdot},   {"k_y", t.best.leg.k_y},
                    {"strides_at_reference", t.best.strides_at_reference}};
    bundle.write_text("gains.json", best.dump(2) + "\n");
    std::cout << best.dump() << '\n';
    return;
  }
  SweepResult result;
  result.speeds = config.speeds;
  result.tunings.resize(config.speeds.size());
  result.tuning_failures.resize(config.speeds.size());
  for (std::size_t i = 0; i < config.speeds.size(); ++i) {
    const double v = config.speeds[i];
    try {
      result.tunings[i] = tune_damping_for_duty_factor(config.model, config.controller, v,
                                                       config.duty_factor.at(v),
                                                       config.damping_search, config.simulation);
    } catch (const TuningError& e) {
      result.tuning_failures[i] = e.what();
    }
  }
  bundle.write_text("tuning.csv", write_csv(tuning_table(result)));
  for (const auto& f : result.tuning_failures)
    if (!f.empty()) throw CommandFailure(kSimulationFailure, "tuning", f);
}

void command_analyze(const Options& o, OutputBundle& bundle) {
  const fs::path dir = o.run_dir;
  const RunConfig config = load_config(dir / "config.json");
  json gait;
  try {
    gait = json::parse(read_text_file(dir / "gait.json"));
  } catch (const json::exception& e) {
    throw CsvError((dir / "gait.json").string() + ": " + e.what());
  }
  ModelParamsd params = config.model;
  params.damping_coefficient = gait.at("damping_coefficient").get<double>();
  const auto strides = parse_timeseries(read_text_file(dir / "timeseries.csv"), params);
  bundle.write_text("metrics.csv",
                    write_csv(metrics_table(
                        metrics_rows(strides, params, config.angular_velocity_window))));
}

void command_fixtures(const RunConfig& config, OutputBundle& bundle) {
  for (const FixtureSpec& spec : standard_fixtures()) {
    const RunConfig c = fixture_config(config, spec);
    const SingleRun run = execute_run(c);
    if (!run.gait.converged())
      throw CommandFailure(kSimulationFailure, "simulation", spec.name + " did not converge");
    bundle.write_text(spec.name + ".json", fixture_document(spec, c, run).dump(2) + "\n");
    write_timeseries(bundle, steady_copies(run.gait), spec.name + ".csv");
    std::cout << spec.name << ": c = " << run.setup.model.damping_coefficient << '\n';
  }
}

// --------------------------------------------------------------------------

using Body = std::function<void(OutputBundle&)>;

/// Runs `body` into `root` and writes the manifest. With --seedless the body
/// runs a second time into a scratch directory and every digest must match.
int execute(const Options& o, const fs::path& root, const std::string& hash, const Body& body) {
  std::optional<CommandFailure> failure;
  OutputBundle bundle(root, hash);
  try {
    body(bundle);
  } catch (const CommandFailure& f) {
    failure = f;
  }
  bundle.write_manifest();
  if (o.seedless && !failure) {
    const fs::path scratch = root / ".seedless";
    std::vector<ManifestEntry> again;
    {
      OutputBundle second(scratch, hash);
      body(second);
      again = second.entries();
    }
    fs::remove_all(scratch);
    const auto first = bundle.entries();
    auto same = [](const ManifestEntry& a, const ManifestEntry& b) {
      return a.path == b.path && a.sha256 == b.sha256;
    };
    if (first.size() != again.size() || !std::equal(first.begin(), first.end(), again.begin(), same))
      return report(kNondeterministic, "nondeterminism", "repeated run produced different output",
                    {{"output", root.string()}});
    std::cout << "deterministic: " << first.size() << " files identical\n";
  }
  if (failure) return report(failure->code, failure->kind, failure->what(),
                             {{"output", root.string()}});
  std::cout << root.string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trunk SLIP running model with virtual-point hip control"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory (default: $TSLIP_OUT/<command>-<hash>)");
    sub->add_option("--format", o.format, "csv, plots or both")
        ->check(CLI::IsMember({"csv", "plots", "both"}));
    sub->add_flag("--seedless", o.seedless, "run twice and require identical output");
  };
  auto add_point = [&](CLI::App* sub) {
    sub->add_option("--vp-radius", o.vp_radius, "VP radius [m], negative below the CoM");
    sub->add_option("--speed", o.speed, "forward speed [m/s]");
  };

  CLI::App* run = app.add_subcommand("run", "simulate one gait");
  CLI::App* sweep = app.add_subcommand("sweep", "VP radius x speed grid");
  CLI::App* analyze = app.add_subcommand("analyze", "recompute metrics from a run directory");
  CLI::App* tune = app.add_subcommand("tune", "damping tuning per speed");
  CLI::App* fixtures = app.add_subcommand("fixtures", "regenerate regression fixtures");
  for (CLI::App* sub : {run, sweep, analyze, tune, fixtures}) add_common(sub);
  for (CLI::App* sub : {run, sweep, tune}) add_point(sub);
  analyze->add_option("run_dir", o.run_dir, "output directory of `tslip run`")
      ->required()
      ->check(CLI::ExistingDirectory);
  tune->add_flag("--gains", o.gains, "grid search over the controller gains instead");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report(kConfigFailure, "usage", e.what());
  }

  try {
    const RunConfig config = resolve_config(o);
    const std::string hash = config_hash(config);
    if (*run)
      return execute(o, output_root(o, config, "run"), hash,
                     [&](OutputBundle& b) { command_run(config, b); });
    if (*sweep) {
      bool all = true;
      const int code = execute(o, output_root(o, config, "sweep"), hash,
                               [&](OutputBundle& b) { command_sweep(config, b, all); });
      if (code == kOk && !all)
        return report(kSimulationFailure, "simulation", "some sweep cells did not converge");
      return code;
    }
    if (*tune)
      return execute(o, output_root(o, config, "tune"), hash,
                     [&](OutputBundle& b) { command_tune(config, b, o.gains); });
    if (*analyze) {
      const fs::path root = o.out ? fs::path(*o.out) : fs::path(o.run_dir) / "analysis";
      return execute(o, root, hash, [&](OutputBundle& b) { command_analyze(o, b); });
    }
    const fs::path root = o.out ? fs::path(*o.out) : fs::path("tests/fixtures");
    return execute(o, root, hash, [&](OutputBundle& b) { command_fixtures(config, b); });
  } catch (const ConfigError& e) {
    return report(kConfigFailure, "config", e.what());
  } catch (const ModelError& e) {
    return report(kConfigFailure, "config", e.what());
  } catch (const SimulationError& e) {
    return report(kSimulationFailure, "simulation", e.what());
  } catch (const CsvError& e) {
    return report(kIoFailure, "input", e.what());
  } catch (const IoError& e) {
    return report(kIoFailure, "io", e.what());
  } catch (const fs::filesystem_error& e) {
    return report(kIoFailure, "io", e.what());
  } catch (const std::exception& e) {
    return report(kIoFailure, "internal", e.what());
  }
}
