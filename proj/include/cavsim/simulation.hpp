#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "cavsim/epoch.hpp"
#include "cavsim/game.hpp"
#include "cavsim/scenario.hpp"

// Closed loop: every active agent runs a decision epoch from its own
// perspective against the step-start snapshot, applies the first increment
// of its chosen sequence, and the nonlinear plant advances one sampling
// period. Records back the paper-style evaluation metrics.

namespace cavsim {

struct StepRecord {
  int step = 0;
  double t = 0.0;
  std::string agent_id;
  VehicleState state;     // at the decision instant
  ControlInput applied;   // control after adding the chosen increment
  DecisionVector decision;
  double ay = 0.0;        // kinematic lateral acceleration under `applied`
  Stage stage = Stage::Passing;
  std::string lane;
  std::string lv_id;
  std::array<std::string, 3> nv_id;
  PayoffBreakdown payoff;
  bool feasible = true;   // false when the epoch fell back
  double solve_wall_s = 0.0;
  long candidates_evaluated = 0;
  long infeasible_candidates = 0;
};

// Per-epoch coalition-dominance audit sample (both solvers on one instance).
struct DominanceSample {
  int step = 0;
  std::string agent_id;
  double gc_objective = 0.0;
  double sg_weighted_sum = 0.0;
  bool fallback = false;
};

struct SimulationLog {
  std::string scenario_name;
  SolverKind solver = SolverKind::Stackelberg;
  double dt = 0.1;
  std::vector<std::string> agent_ids;
  std::vector<StepRecord> records;  // ordered by (step, agent)
  bool collision = false;
  std::string collision_a;
  std::string collision_b;
  double collision_time = -1.0;
  bool fallback_used = false;
  std::string abort_reason;  // empty on clean completion
  std::vector<DominanceSample> dominance;  // filled when auditing
};

struct SimOptions {
  ExecutionPolicy policy = ExecutionPolicy::Parallel;
  bool dominance_audit = false;
};

SimulationLog run(const ScenarioConfig& config, const SimOptions& options = {});

struct QuartileSummary {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

struct AgentMetrics {
  std::string id;
  double vx_max = 0.0;
  double vx_rms = 0.0;
  QuartileSummary ax;
  QuartileSummary ay;
  std::map<std::string, double> min_gap;  // to every other agent, m
};

struct MetricsReport {
  std::vector<AgentMetrics> agents;
  double system_vx_rms = 0.0;
  double mean_solve_time_s = 0.0;  // mean per-epoch wall time
  long epochs = 0;
};

MetricsReport metrics(const SimulationLog& log);

}  // namespace cavsim
