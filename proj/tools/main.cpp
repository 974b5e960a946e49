#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cavsim/exporter.hpp"
#include "cavsim/scenario.hpp"
#include "cavsim/simulation.hpp"

namespace {

// Exit codes: 0 clean, 2 configuration error, 3 collision, 4 infeasible
// fallback used, 5 I/O or internal failure.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitCollision = 3;
constexpr int kExitFallback = 4;
constexpr int kExitError = 5;

struct Overrides {
  std::optional<std::string> solver;
  std::optional<unsigned> seed;
  std::optional<int> np;
  std::optional<int> nc;
  std::optional<double> dt;
  std::optional<int> grid;
  bool serial = false;
  bool audit = false;
};

void apply_overrides(cavsim::ScenarioConfig& cfg, const Overrides& o) {
  if (o.solver) cfg.solver = cavsim::solver_from_string(*o.solver);
  if (o.seed) cfg.seed = *o.seed;
  if (o.np) cfg.horizon.np = *o.np;
  if (o.nc) cfg.horizon.nc = *o.nc;
  if (o.dt) cfg.horizon.dt = *o.dt;
  if (o.grid) {
    cfg.grid.levels_ax = *o.grid;
    cfg.grid.levels_delta = *o.grid;
  }
  cavsim::validate_horizon(cfg.horizon);
}

std::string default_out_dir() {
  if (const char* env = std::getenv("CAVSIM_OUT_DIR")) return env;
  return "out";
}

void print_metrics(const cavsim::MetricsReport& report, const std::string& label) {
  std::cout << "== " << label << " ==\n";
  std::cout << std::left << std::setw(8) << "agent" << std::right << std::setw(12) << "vx_max"
            << std::setw(12) << "vx_rms" << std::setw(12) << "ax_med" << std::setw(12)
            << "ay_med" << '\n';
  for (const auto& a : report.agents) {
    std::cout << std::left << std::setw(8) << a.id << std::right << std::fixed
              << std::setprecision(3) << std::setw(12) << a.vx_max << std::setw(12) << a.vx_rms
              << std::setw(12) << a.ax.median << std::setw(12) << a.ay.median << '\n';
  }
  std::cout << "system velocity RMS: " << std::setprecision(4) << report.system_vx_rms
            << " m/s\n";
  std::cout << "mean per-epoch solve time: " << std::setprecision(6)
            << report.mean_solve_time_s << " s over " << report.epochs << " epochs\n";
  std::cout.unsetf(std::ios::fixed);
}

int finish_run(const cavsim::SimulationLog& log) {
  if (!log.abort_reason.empty()) {
    std::cerr << "run aborted: " << log.abort_reason << '\n';
    return kExitError;
  }
  if (log.collision) {
    std::cerr << "collision between '" << log.collision_a << "' and '" << log.collision_b
              << "' at t=" << log.collision_time << " s\n";
    return kExitCollision;
  }
  if (log.fallback_used) {
    std::cerr << "note: infeasible epochs fell back to maximum braking\n";
    return kExitFallback;
  }
  return kExitOk;
}

int cmd_run(const std::string& scenario_path, const Overrides& o, const std::string& out_dir,
            bool quiet) {
  cavsim::ScenarioConfig cfg;
  try {
    cfg = cavsim::load_scenario(scenario_path);
    apply_overrides(cfg, o);
  } catch (const std::exception& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    cavsim::SimOptions opts;
    opts.policy = o.serial ? cavsim::ExecutionPolicy::Serial : cavsim::ExecutionPolicy::Parallel;
    opts.dominance_audit = o.audit;
    const cavsim::SimulationLog log = cavsim::run(cfg, opts);
    if (log.records.empty()) {
      std::cerr << "run produced no records: " << log.abort_reason << '\n';
      return kExitError;
    }
    const cavsim::MetricsReport report = cavsim::metrics(log);
    const auto paths = cavsim::export_run(log, report, cfg, out_dir);
    if (!quiet) {
      print_metrics(report, cfg.name + " [" + cavsim::to_string(cfg.solver) + "]");
      std::cout << "wrote " << paths.trajectories.size() << " trajectory files to " << out_dir
                << '\n';
    }
    return finish_run(log);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
}

int cmd_compare(const std::string& scenario_path, const Overrides& o,
                const std::string& out_dir) {
  cavsim::ScenarioConfig cfg;
  try {
    cfg = cavsim::load_scenario(scenario_path);
    apply_overrides(cfg, o);
  } catch (const std::exception& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    cavsim::SimOptions opts;
    opts.policy = o.serial ? cavsim::ExecutionPolicy::Serial : cavsim::ExecutionPolicy::Parallel;

    int worst = kExitOk;
    double rms[2] = {0.0, 0.0};
    cavsim::MetricsReport reports[2];
    const cavsim::SolverKind kinds[2] = {cavsim::SolverKind::Stackelberg,
                                         cavsim::SolverKind::GrandCoalition};
    for (int i = 0; i < 2; ++i) {
      cfg.solver = kinds[i];
      const cavsim::SimulationLog log = cavsim::run(cfg, opts);
      if (log.records.empty()) {
        std::cerr << "run produced no records: " << log.abort_reason << '\n';
        return kExitError;
      }
      reports[i] = cavsim::metrics(log);
      rms[i] = reports[i].system_vx_rms;
      cavsim::export_run(log, reports[i], cfg, out_dir);
      print_metrics(reports[i], cfg.name + " [" + cavsim::to_string(kinds[i]) + "]");
      worst = std::max(worst, finish_run(log));
    }
    std::cout << "\nsystem velocity RMS: sg=" << rms[0] << "  gc=" << rms[1]
              << "  (gc - sg = " << rms[1] - rms[0] << ")\n";
    std::cout << "per-agent velocity RMS deltas (gc - sg):\n";
    for (size_t a = 0; a < reports[0].agents.size(); ++a) {
      std::cout << "  " << reports[0].agents[a].id << ": "
                << reports[1].agents[a].vx_rms - reports[0].agents[a].vx_rms << '\n';
    }
    return worst;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
}

int cmd_validate(const std::string& scenario_path) {
  try {
    const cavsim::ScenarioConfig cfg = cavsim::load_scenario(scenario_path);
    const cavsim::RoundaboutGeometry geo(cfg.geometry);
    const auto agents = cavsim::instantiate_agents(cfg, geo);
    std::cout << "scenario '" << cfg.name << "' is valid: " << agents.size()
              << " agents, duration " << cfg.duration_s << " s\n";
    std::cout << "resolved configuration (defaults filled):\n"
              << cavsim::resolved_config_json(cfg);
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Game-theoretic decision-making simulator for connected vehicles at a "
               "two-lane roundabout"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir = default_out_dir();
  Overrides o;
  bool quiet = false;

  auto add_common = [&](CLI::App* cmd, bool with_solver) {
    cmd->add_option("scenario", scenario_path, "scenario file (JSON)")->required();
    cmd->add_option("--out", out_dir, "output directory (env CAVSIM_OUT_DIR)");
    cmd->add_option("--seed", o.seed, "override the scenario seed");
    cmd->add_option("--np", o.np, "prediction horizon steps");
    cmd->add_option("--nc", o.nc, "control horizon steps");
    cmd->add_option("--dt", o.dt, "sampling time, seconds");
    cmd->add_option("--grid", o.grid, "levels per continuous decision axis");
    cmd->add_flag("--serial", o.serial, "disable the parallel agent loop");
    if (with_solver) {
      cmd->add_option("--solver", o.solver, "sg (Stackelberg) or gc (grand coalition)");
    }
  };

  CLI::App* run_cmd = app.add_subcommand("run", "run one scenario and export the results");
  add_common(run_cmd, true);
  run_cmd->add_flag("--audit", o.audit, "solve both games per epoch and record dominance");
  run_cmd->add_flag("--quiet", quiet, "suppress the metrics table");

  CLI::App* compare_cmd =
      app.add_subcommand("compare", "run both solvers on the identical scenario and seed");
  add_common(compare_cmd, false);

  CLI::App* validate_cmd =
      app.add_subcommand("validate", "load and validate a scenario without running it");
  validate_cmd->add_option("scenario", scenario_path, "scenario file (JSON)")->required();

  CLI11_PARSE(app, argc, argv);

  if (run_cmd->parsed()) return cmd_run(scenario_path, o, out_dir, quiet);
  if (compare_cmd->parsed()) return cmd_compare(scenario_path, o, out_dir);
  if (validate_cmd->parsed()) return cmd_validate(scenario_path);
  return kExitConfig;
}
