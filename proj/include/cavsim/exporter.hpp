#pragma once

#include <string>
#include <vector>

#include "cavsim/scenario.hpp"
#include "cavsim/simulation.hpp"

// Run artifacts: one trajectory file per agent, a metrics table, a pairwise
// minimum-gap table, the fully resolved configuration, and a separate timing
// file. Everything except the timing file is byte-deterministic for a fixed
// config and seed; floats are written with 9 significant digits.

namespace cavsim {

struct ExportPaths {
  std::vector<std::string> trajectories;
  std::string metrics;
  std::string gaps;
  std::string config;
  std::string timing;
};

std::string run_stem(const std::string& scenario_name, SolverKind solver);

ExportPaths export_run(const SimulationLog& log, const MetricsReport& report,
                       const ScenarioConfig& config, const std::string& out_dir);

// Rebuilds a log (states, controls, lateral accelerations; no solver timing)
// from previously exported trajectory files.
SimulationLog import_run(const std::string& out_dir, const std::string& scenario_name,
                         SolverKind solver, const std::vector<std::string>& agent_ids);

}  // namespace cavsim
