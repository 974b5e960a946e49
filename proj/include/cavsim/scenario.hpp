#pragma once

#include <array>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cavsim/constraints.hpp"
#include "cavsim/geometry.hpp"
#include "cavsim/kinematics.hpp"
#include "cavsim/payoff.hpp"
#include "cavsim/types.hpp"

// Scenario definition and the per-step classification layer: which lane an
// agent is associated with, which decision stage it is in, and which roles
// (leader / lateral opponents / irrelevant) the other agents play from its
// perspective.

namespace cavsim {

struct GridConfig {
  int levels_ax = 5;
  int levels_delta = 5;
};

struct MpcWeights {
  double q = 1.0;
  double r_dax = 0.05;
  double r_ddelta = 1.0;
  double r_alpha = 0.01;
  double r_beta = 0.01;
};

struct Route {
  char entry_port = 'A';  // '-' when spawned past the entry
  char exit_port = 'B';
};

struct AgentSeed {
  std::string id;
  DrivingStyle style = DrivingStyle::Normal;
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  Route route;
  std::string spawn_lane;  // derived from position when empty
  VehicleParameters params;
};

// Runtime agent: seed plus the evolving state the simulator owns.
struct VehicleAgent {
  std::string id;
  DrivingStyle style = DrivingStyle::Normal;
  Route route;
  VehicleParameters params;

  VehicleState state;
  ControlInput prev_control;
  std::string lane_current;
  std::string lane_target;
  Behavior prev_behavior;
  std::vector<ControlDelta> prev_deltas;  // last applied decision sequence
  bool active = true;

  // Maneuver-progress ratchet: best lateral/heading error reached toward the
  // committed target lane. The constraint funnel anchors on it so a maneuver
  // may approach its target but never drift back out.
  std::string funnel_anchor_lane;
  double funnel_anchor_dy = std::numeric_limits<double>::infinity();
  double funnel_anchor_dphi = std::numeric_limits<double>::infinity();
};

struct ScenarioConfig {
  int schema_version = 1;
  std::string name;
  double duration_s = 30.0;
  unsigned seed = 0;
  SolverKind solver = SolverKind::Stackelberg;
  HorizonConfig horizon;
  GridConfig grid;
  RoundaboutParams geometry;
  StyleTable styles;
  PayoffWeights payoff;
  MpcWeights mpc;
  ConstraintBounds bounds;
  VehicleParameters vehicle_defaults;
  std::vector<AgentSeed> agents;
};

// Parses and validates a scenario document. Throws std::runtime_error with
// file/field context on parse errors and invariant violations.
ScenarioConfig load_scenario(const std::string& path);
ScenarioConfig parse_scenario(const std::string& text, const std::string& origin);

// Serializes the fully resolved configuration (all defaults filled) with a
// deterministic field order.
std::string resolved_config_json(const ScenarioConfig& config);

// Instantiates runtime agents: spawn lane resolution, heading and steering
// initialized to track the spawn lane, collision-free validation.
std::vector<VehicleAgent> instantiate_agents(const ScenarioConfig& config,
                                             const RoundaboutGeometry& geo);

// Role map from one agent's perspective, by agent index; -1 marks an empty
// slot. Lateral slots at the entering stage: [adjacent inbound lane,
// outer ring, inner ring]; at passing/exiting: [change-target lane occupant,
// approaching merger, unused].
struct RoleMap {
  int lv = -1;
  std::array<int, 3> nv{-1, -1, -1};
  std::vector<int> iv;
};

Stage classify_stage(const VehicleAgent& agent, const RoundaboutGeometry& geo);

RoleMap assign_roles(const std::vector<VehicleAgent>& agents, size_t ego_index,
                     const RoundaboutGeometry& geo);

// The valid maneuvers for an agent this epoch together with the lane each
// one steers toward, plus the merge yield point at the entering stage.
struct BehaviorOption {
  Behavior behavior;
  std::string target_lane;
};

struct AgentDecisionContext {
  Stage stage = Stage::Passing;
  std::string lane_current;
  bool exit_commit = false;
  std::vector<BehaviorOption> options;
  std::optional<Vec2> merge_stop_point;
};

AgentDecisionContext decision_context(const VehicleAgent& agent, const RoundaboutGeometry& geo);

// Flips the lane association once the target lane is nearer than the
// current one.
void update_lane_association(VehicleAgent& agent, const RoundaboutGeometry& geo);

// Distance traveled along the outbound lane past the exit crossing;
// nullopt while not on an outbound lane.
std::optional<double> exit_travel(const VehicleAgent& agent, const RoundaboutGeometry& geo);

// Forward arc length (m) along the agent's ring lane to its exit anchor.
double arc_to_exit(const VehicleAgent& agent, const RoundaboutGeometry& geo);

}  // namespace cavsim
