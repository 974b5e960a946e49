#include "cavsim/exporter.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cavsim {

namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write '" + path.string() + "'");
  }
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

}  // namespace

std::string run_stem(const std::string& scenario_name, SolverKind solver) {
  return scenario_name + "_" + to_string(solver);
}

ExportPaths export_run(const SimulationLog& log, const MetricsReport& report,
                       const ScenarioConfig& config, const std::string& out_dir) {
  const fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw std::runtime_error("cannot create output directory '" + out_dir +
                             "': " + ec.message());
  }
  const std::string stem = run_stem(log.scenario_name, log.solver);
  ExportPaths paths;

  for (const std::string& id : log.agent_ids) {
    const fs::path file = dir / (stem + "_" + id + ".csv");
    auto out = open_out(file);
    out << "step,t,vx,phi,x,y,ax,delta_f,ay,d_ax,d_delta_f,alpha,beta,stage,lane,"
           "lv,nv1,nv2,nv3,feasible,p_s_log,p_s_lat,p_s_lk,p_s,p_c,p_e,p_total\n";
    for (const auto& r : log.records) {
      if (r.agent_id != id) continue;
      out << r.step << ',' << fmt(r.t) << ',' << fmt(r.state.vx) << ',' << fmt(r.state.phi)
          << ',' << fmt(r.state.x) << ',' << fmt(r.state.y) << ',' << fmt(r.applied.ax) << ','
          << fmt(r.applied.delta_f) << ',' << fmt(r.ay) << ',' << fmt(r.decision.d_ax) << ','
          << fmt(r.decision.d_delta_f) << ',' << r.decision.alpha << ',' << r.decision.beta
          << ',' << to_string(r.stage) << ',' << r.lane << ',' << r.lv_id << ',' << r.nv_id[0]
          << ',' << r.nv_id[1] << ',' << r.nv_id[2] << ',' << (r.feasible ? 1 : 0) << ','
          << fmt(r.payoff.p_s_log) << ',' << fmt(r.payoff.p_s_lat) << ','
          << fmt(r.payoff.p_s_lk) << ',' << fmt(r.payoff.p_s) << ',' << fmt(r.payoff.p_c)
          << ',' << fmt(r.payoff.p_e) << ',' << fmt(r.payoff.total) << '\n';
    }
    paths.trajectories.push_back(file.string());
  }

  {
    const fs::path file = dir / (stem + "_metrics.csv");
    auto out = open_out(file);
    out << "agent,vx_max,vx_rms,ax_min,ax_q1,ax_median,ax_q3,ax_max,"
           "ay_min,ay_q1,ay_median,ay_q3,ay_max\n";
    for (const auto& a : report.agents) {
      out << a.id << ',' << fmt(a.vx_max) << ',' << fmt(a.vx_rms) << ',' << fmt(a.ax.min)
          << ',' << fmt(a.ax.q1) << ',' << fmt(a.ax.median) << ',' << fmt(a.ax.q3) << ','
          << fmt(a.ax.max) << ',' << fmt(a.ay.min) << ',' << fmt(a.ay.q1) << ','
          << fmt(a.ay.median) << ',' << fmt(a.ay.q3) << ',' << fmt(a.ay.max) << '\n';
    }
    out << "SYSTEM," << fmt(0.0) << ',' << fmt(report.system_vx_rms);
    for (int i = 0; i < 10; ++i) out << ',' << fmt(0.0);
    out << '\n';
    paths.metrics = file.string();
  }

  {
    const fs::path file = dir / (stem + "_gaps.csv");
    auto out = open_out(file);
    out << "agent,other,min_gap\n";
    for (const auto& a : report.agents) {
      for (const auto& [other, gap] : a.min_gap) {
        out << a.id << ',' << other << ',' << fmt(gap) << '\n';
      }
    }
    paths.gaps = file.string();
  }

  {
    const fs::path file = dir / (stem + "_config.json");
    auto out = open_out(file);
    out << resolved_config_json(config);
    paths.config = file.string();
  }

  {
    // Wall-clock timing is machine-dependent and deliberately kept out of
    // the deterministic artifact set.
    const fs::path file = dir / (stem + "_timing.json");
    auto out = open_out(file);
    out << "{\n  \"mean_solve_time_s\": " << fmt(report.mean_solve_time_s)
        << ",\n  \"epochs\": " << report.epochs << "\n}\n";
    paths.timing = file.string();
  }

  return paths;
}

SimulationLog import_run(const std::string& out_dir, const std::string& scenario_name,
                         SolverKind solver, const std::vector<std::string>& agent_ids) {
  const std::string stem = run_stem(scenario_name, solver);
  SimulationLog log;
  log.scenario_name = scenario_name;
  log.solver = solver;
  log.agent_ids = agent_ids;

  for (const std::string& id : agent_ids) {
    const fs::path file = fs::path(out_dir) / (stem + "_" + id + ".csv");
    std::ifstream in(file);
    if (!in) {
      throw std::runtime_error("cannot read '" + file.string() + "'");
    }
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto f = split_csv(line);
      if (f.size() < 27) {
        throw std::runtime_error("malformed row in '" + file.string() + "'");
      }
      StepRecord r;
      r.step = std::stoi(f[0]);
      r.t = std::stod(f[1]);
      r.agent_id = id;
      r.state = VehicleState{std::stod(f[2]), std::stod(f[3]), std::stod(f[4]), std::stod(f[5])};
      r.applied = ControlInput{std::stod(f[6]), std::stod(f[7])};
      r.ay = std::stod(f[8]);
      r.decision = DecisionVector{std::stod(f[9]), std::stod(f[10]), std::stoi(f[11]),
                                  std::stoi(f[12])};
      r.lane = f[14];
      r.feasible = f[19] == "1";
      r.payoff = PayoffBreakdown{std::stod(f[20]), std::stod(f[21]), std::stod(f[22]),
                                 std::stod(f[23]), std::stod(f[24]), std::stod(f[25]),
                                 std::stod(f[26])};
      log.records.push_back(std::move(r));
    }
  }
  // Restore the (step, agent) interleaving.
  std::stable_sort(log.records.begin(), log.records.end(),
                   [&](const StepRecord& a, const StepRecord& b) { return a.step < b.step; });
  return log;
}

}  // namespace cavsim
