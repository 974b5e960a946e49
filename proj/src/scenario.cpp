#include "cavsim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace cavsim {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string to_string(DrivingStyle s) {
  switch (s) {
    case DrivingStyle::Aggressive: return "aggressive";
    case DrivingStyle::Conservative: return "conservative";
    case DrivingStyle::Normal: break;
  }
  return "normal";
}

std::string to_string(Stage s) {
  switch (s) {
    case Stage::Entering: return "entering";
    case Stage::Exiting: return "exiting";
    case Stage::Passing: break;
  }
  return "passing";
}

std::string to_string(SolverKind s) {
  return s == SolverKind::GrandCoalition ? "gc" : "sg";
}

DrivingStyle style_from_string(const std::string& s) {
  if (s == "aggressive") return DrivingStyle::Aggressive;
  if (s == "normal") return DrivingStyle::Normal;
  if (s == "conservative") return DrivingStyle::Conservative;
  throw std::runtime_error("unknown driving style '" + s + "'");
}

SolverKind solver_from_string(const std::string& s) {
  if (s == "sg" || s == "stackelberg") return SolverKind::Stackelberg;
  if (s == "gc" || s == "grand_coalition") return SolverKind::GrandCoalition;
  throw std::runtime_error("unknown solver '" + s + "' (expected sg or gc)");
}

namespace {

constexpr double kDegToRad = M_PI / 180.0;

// Role-assignment windows, meters.
constexpr double kLeaderWindow = 60.0;
constexpr double kAdjacentWindow = 22.0;
constexpr double kConflictArcWindow = 45.0;
constexpr double kMergerDistanceWindow = 38.0;
constexpr double kConflictBehindSlack = 5.0;

[[noreturn]] void config_error(const std::string& origin, const std::string& what) {
  throw std::runtime_error("scenario " + origin + ": " + what);
}

void expect_keys(const json& obj, std::initializer_list<const char*> allowed,
                 const std::string& origin, const std::string& section) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* k) { return it.key() == k; }) == allowed.end()) {
      config_error(origin, "unknown field '" + it.key() + "' in " + section);
    }
  }
}

double get_num(const json& obj, const char* key, double fallback, const std::string& origin) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) config_error(origin, std::string("field '") + key + "' must be a number");
  return obj[key].get<double>();
}

int get_int(const json& obj, const char* key, int fallback, const std::string& origin) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer())
    config_error(origin, std::string("field '") + key + "' must be an integer");
  return obj[key].get<int>();
}

// Accepts either <base>_deg or <base>_rad.
double get_angle(const json& obj, const std::string& base, double fallback_rad,
                 const std::string& origin) {
  const std::string deg_key = base + "_deg";
  const std::string rad_key = base + "_rad";
  if (obj.contains(deg_key) && obj.contains(rad_key)) {
    config_error(origin, "give only one of '" + deg_key + "' and '" + rad_key + "'");
  }
  if (obj.contains(deg_key)) return obj[deg_key].get<double>() * kDegToRad;
  if (obj.contains(rad_key)) return obj[rad_key].get<double>();
  return fallback_rad;
}

StyleWeights parse_style_row(const json& row, const std::string& origin,
                             const std::string& name) {
  if (!row.is_array() || row.size() != 3) {
    config_error(origin, "style_weights." + name + " must be an array [ks, kc, ke]");
  }
  return StyleWeights{row[0].get<double>(), row[1].get<double>(), row[2].get<double>()};
}

double line_circle_crossing_s(const LaneRef& lane, double radius) {
  const Vec2 base = lane.point_at(0.0);
  const Vec2 dir = (lane.point_at(1.0) - base).normalized();
  const double b = 2.0 * base.dot(dir);
  const double c = base.squaredNorm() - radius * radius;
  const double disc = b * b - 4.0 * c;
  if (disc < 0.0) {
    throw std::runtime_error("lane " + lane.id() + " does not reach radius " +
                             std::to_string(radius));
  }
  const double s1 = (-b - std::sqrt(disc)) / 2.0;
  const double s2 = (-b + std::sqrt(disc)) / 2.0;
  return s1 > 0.0 ? s1 : s2;
}

double ring_station_at_angle(const LaneRef& ring, double angle) {
  double a = std::fmod(angle, 2.0 * M_PI);
  if (a < 0.0) a += 2.0 * M_PI;
  return a * (ring.length() / (2.0 * M_PI));
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text, nullptr, true, true);
  } catch (const json::exception& e) {
    config_error(origin, std::string("parse error: ") + e.what());
  }

  ScenarioConfig cfg;
  expect_keys(doc,
              {"schema_version", "name", "duration_s", "seed", "solver", "horizon", "grid",
               "geometry", "style_weights", "payoff_weights", "mpc_weights", "constraints",
               "vehicle_defaults", "agents"},
              origin, "document");

  cfg.schema_version = get_int(doc, "schema_version", -1, origin);
  if (cfg.schema_version != 1) {
    config_error(origin, "schema_version must be 1");
  }
  cfg.name = doc.value("name", std::string("scenario"));
  cfg.duration_s = get_num(doc, "duration_s", cfg.duration_s, origin);
  if (!(cfg.duration_s > 0.0)) config_error(origin, "duration_s must be positive");
  cfg.seed = static_cast<unsigned>(get_int(doc, "seed", 0, origin));
  if (doc.contains("solver")) cfg.solver = solver_from_string(doc["solver"].get<std::string>());

  if (doc.contains("horizon")) {
    const json& h = doc["horizon"];
    expect_keys(h, {"dt", "np", "nc"}, origin, "horizon");
    cfg.horizon.dt = get_num(h, "dt", cfg.horizon.dt, origin);
    cfg.horizon.np = get_int(h, "np", cfg.horizon.np, origin);
    cfg.horizon.nc = get_int(h, "nc", cfg.horizon.nc, origin);
  }
  try {
    validate_horizon(cfg.horizon);
  } catch (const std::exception& e) {
    config_error(origin, e.what());
  }

  if (doc.contains("grid")) {
    const json& g = doc["grid"];
    expect_keys(g, {"levels_ax", "levels_delta"}, origin, "grid");
    cfg.grid.levels_ax = get_int(g, "levels_ax", cfg.grid.levels_ax, origin);
    cfg.grid.levels_delta = get_int(g, "levels_delta", cfg.grid.levels_delta, origin);
  }

  if (doc.contains("geometry")) {
    const json& g = doc["geometry"];
    expect_keys(g,
                {"inner_radius", "outer_radius", "lane_width", "offset_inner", "offset_outer",
                 "main_road_length", "exit_threshold_deg", "exit_commit_deg"},
                origin, "geometry");
    cfg.geometry.inner_radius = get_num(g, "inner_radius", cfg.geometry.inner_radius, origin);
    cfg.geometry.outer_radius = get_num(g, "outer_radius", cfg.geometry.outer_radius, origin);
    cfg.geometry.lane_width = get_num(g, "lane_width", cfg.geometry.lane_width, origin);
    cfg.geometry.offset_inner = get_num(g, "offset_inner", cfg.geometry.offset_inner, origin);
    cfg.geometry.offset_outer = get_num(g, "offset_outer", cfg.geometry.offset_outer, origin);
    cfg.geometry.main_road_length =
        get_num(g, "main_road_length", cfg.geometry.main_road_length, origin);
    cfg.geometry.exit_threshold_deg =
        get_num(g, "exit_threshold_deg", cfg.geometry.exit_threshold_deg, origin);
    cfg.geometry.exit_commit_deg =
        get_num(g, "exit_commit_deg", cfg.geometry.exit_commit_deg, origin);
  }

  if (doc.contains("style_weights")) {
    const json& s = doc["style_weights"];
    expect_keys(s, {"aggressive", "normal", "conservative"}, origin, "style_weights");
    if (s.contains("aggressive"))
      cfg.styles.aggressive = parse_style_row(s["aggressive"], origin, "aggressive");
    if (s.contains("normal")) cfg.styles.normal = parse_style_row(s["normal"], origin, "normal");
    if (s.contains("conservative"))
      cfg.styles.conservative = parse_style_row(s["conservative"], origin, "conservative");
  }

  if (doc.contains("payoff_weights")) {
    const json& p = doc["payoff_weights"];
    expect_keys(p,
                {"kv_log", "ks_log", "kv_lat", "ks_lat", "ky_lk", "kphi_lk", "kax", "kay",
                 "ke_inner", "epsilon", "vx_max", "d_far", "dv_cap", "dv_floor"},
                origin, "payoff_weights");
    PayoffWeights& w = cfg.payoff;
    w.kv_log = get_num(p, "kv_log", w.kv_log, origin);
    w.ks_log = get_num(p, "ks_log", w.ks_log, origin);
    w.kv_lat = get_num(p, "kv_lat", w.kv_lat, origin);
    w.ks_lat = get_num(p, "ks_lat", w.ks_lat, origin);
    w.ky_lk = get_num(p, "ky_lk", w.ky_lk, origin);
    w.kphi_lk = get_num(p, "kphi_lk", w.kphi_lk, origin);
    w.kax = get_num(p, "kax", w.kax, origin);
    w.kay = get_num(p, "kay", w.kay, origin);
    w.ke_inner = get_num(p, "ke_inner", w.ke_inner, origin);
    w.epsilon = get_num(p, "epsilon", w.epsilon, origin);
    w.vx_max = get_num(p, "vx_max", w.vx_max, origin);
    w.d_far = get_num(p, "d_far", w.d_far, origin);
    w.dv_cap = get_num(p, "dv_cap", w.dv_cap, origin);
    w.dv_floor = get_num(p, "dv_floor", w.dv_floor, origin);
    if (!(w.epsilon > 0.0)) config_error(origin, "payoff epsilon must be positive");
  }

  if (doc.contains("mpc_weights")) {
    const json& m = doc["mpc_weights"];
    expect_keys(m, {"q", "r_dax", "r_ddelta", "r_alpha", "r_beta"}, origin, "mpc_weights");
    cfg.mpc.q = get_num(m, "q", cfg.mpc.q, origin);
    cfg.mpc.r_dax = get_num(m, "r_dax", cfg.mpc.r_dax, origin);
    cfg.mpc.r_ddelta = get_num(m, "r_ddelta", cfg.mpc.r_ddelta, origin);
    cfg.mpc.r_alpha = get_num(m, "r_alpha", cfg.mpc.r_alpha, origin);
    cfg.mpc.r_beta = get_num(m, "r_beta", cfg.mpc.r_beta, origin);
    if (cfg.mpc.q < 0.0 || cfg.mpc.r_dax < 0.0 || cfg.mpc.r_ddelta < 0.0 ||
        cfg.mpc.r_alpha < 0.0 || cfg.mpc.r_beta < 0.0) {
      config_error(origin, "mpc weights must be non-negative");
    }
  }

  if (doc.contains("constraints")) {
    const json& c = doc["constraints"];
    expect_keys(c,
                {"ds_max", "dy_max", "dphi_max_deg", "dphi_max_rad", "ax_max", "ay_max",
                 "vx_max", "dax_max", "ddelta_max_deg", "ddelta_max_rad", "delta_max_deg",
                 "delta_max_rad", "enforce_station_bound"},
                origin, "constraints");
    ConstraintBounds& b = cfg.bounds;
    b.ds_max = get_num(c, "ds_max", b.ds_max, origin);
    b.dy_max = get_num(c, "dy_max", b.dy_max, origin);
    b.dphi_max = get_angle(c, "dphi_max", b.dphi_max, origin);
    b.ax_max = get_num(c, "ax_max", b.ax_max, origin);
    b.ay_max = get_num(c, "ay_max", b.ay_max, origin);
    b.vx_max = get_num(c, "vx_max", b.vx_max, origin);
    b.dax_max = get_num(c, "dax_max", b.dax_max, origin);
    b.ddelta_max = get_angle(c, "ddelta_max", b.ddelta_max, origin);
    b.delta_max = get_angle(c, "delta_max", b.delta_max, origin);
    if (c.contains("enforce_station_bound")) {
      b.enforce_station_bound = c["enforce_station_bound"].get<bool>();
    }
  }
  try {
    validate_bounds(cfg.bounds);
  } catch (const std::exception& e) {
    config_error(origin, e.what());
  }

  if (doc.contains("vehicle_defaults")) {
    const json& v = doc["vehicle_defaults"];
    expect_keys(v, {"lf", "lr", "lv"}, origin, "vehicle_defaults");
    cfg.vehicle_defaults.lf = get_num(v, "lf", cfg.vehicle_defaults.lf, origin);
    cfg.vehicle_defaults.lr = get_num(v, "lr", cfg.vehicle_defaults.lr, origin);
    cfg.vehicle_defaults.lv = get_num(v, "lv", cfg.vehicle_defaults.lv, origin);
  }
  if (!(cfg.vehicle_defaults.lf > 0.0 && cfg.vehicle_defaults.lr > 0.0 &&
        cfg.vehicle_defaults.lv > 0.0)) {
    config_error(origin, "vehicle_defaults lf, lr, lv must be positive");
  }

  if (!doc.contains("agents") || !doc["agents"].is_array() || doc["agents"].empty()) {
    config_error(origin, "missing non-empty 'agents' array");
  }
  for (const json& a : doc["agents"]) {
    expect_keys(a, {"id", "style", "x", "y", "vx", "entry", "exit", "spawn_lane", "lf", "lr", "lv"},
                origin, "agent");
    AgentSeed seed;
    if (!a.contains("id")) config_error(origin, "agent without 'id'");
    seed.id = a["id"].get<std::string>();
    const std::string where = "agent '" + seed.id + "'";
    try {
      seed.style = a.contains("style") ? style_from_string(a["style"].get<std::string>())
                                       : DrivingStyle::Normal;
    } catch (const std::exception& e) {
      config_error(origin, where + ": " + e.what());
    }
    if (!a.contains("x") || !a.contains("y") || !a.contains("vx")) {
      config_error(origin, where + ": needs x, y, vx");
    }
    seed.x = a["x"].get<double>();
    seed.y = a["y"].get<double>();
    seed.vx = a["vx"].get<double>();
    if (!std::isfinite(seed.x) || !std::isfinite(seed.y) || !std::isfinite(seed.vx) ||
        seed.vx < 0.0) {
      config_error(origin, where + ": x, y finite and vx >= 0 required");
    }
    const std::string entry = a.value("entry", std::string("-"));
    const std::string exit = a.value("exit", std::string());
    if (entry.size() != 1 || (entry != "-" && (entry[0] < 'A' || entry[0] > 'D'))) {
      config_error(origin, where + ": entry must be one of A, B, C, D or '-'");
    }
    if (exit.size() != 1 || exit[0] < 'A' || exit[0] > 'D') {
      config_error(origin, where + ": exit must be one of A, B, C, D");
    }
    seed.route.entry_port = entry[0];
    seed.route.exit_port = exit[0];
    seed.spawn_lane = a.value("spawn_lane", std::string());
    seed.params = cfg.vehicle_defaults;
    seed.params.lf = get_num(a, "lf", seed.params.lf, origin);
    seed.params.lr = get_num(a, "lr", seed.params.lr, origin);
    seed.params.lv = get_num(a, "lv", seed.params.lv, origin);
    for (const auto& other : cfg.agents) {
      if (other.id == seed.id) config_error(origin, "duplicate agent id '" + seed.id + "'");
    }
    cfg.agents.push_back(std::move(seed));
  }

  // Pairwise spawn clearance.
  for (size_t i = 0; i < cfg.agents.size(); ++i) {
    for (size_t j = i + 1; j < cfg.agents.size(); ++j) {
      const auto& a = cfg.agents[i];
      const auto& b = cfg.agents[j];
      const double dist = std::hypot(a.x - b.x, a.y - b.y);
      const double clearance = 0.5 * (a.params.lv + b.params.lv);
      if (dist <= clearance) {
        std::ostringstream msg;
        msg << "agents '" << a.id << "' and '" << b.id << "' start " << dist
            << " m apart, below the clearance " << clearance << " m";
        config_error(origin, msg.str());
      }
    }
  }
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("scenario " + path + ": cannot open file");
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path);
}

std::string resolved_config_json(const ScenarioConfig& cfg) {
  ordered_json doc;
  doc["schema_version"] = cfg.schema_version;
  doc["name"] = cfg.name;
  doc["duration_s"] = cfg.duration_s;
  doc["seed"] = cfg.seed;
  doc["solver"] = to_string(cfg.solver);
  doc["horizon"] = {{"dt", cfg.horizon.dt}, {"np", cfg.horizon.np}, {"nc", cfg.horizon.nc}};
  doc["grid"] = {{"levels_ax", cfg.grid.levels_ax}, {"levels_delta", cfg.grid.levels_delta}};
  doc["geometry"] = {{"inner_radius", cfg.geometry.inner_radius},
                     {"outer_radius", cfg.geometry.outer_radius},
                     {"lane_width", cfg.geometry.lane_width},
                     {"offset_inner", cfg.geometry.offset_inner},
                     {"offset_outer", cfg.geometry.offset_outer},
                     {"main_road_length", cfg.geometry.main_road_length},
                     {"exit_threshold_deg", cfg.geometry.exit_threshold_deg},
                     {"exit_commit_deg", cfg.geometry.exit_commit_deg}};
  doc["style_weights"] = {
      {"aggressive", {cfg.styles.aggressive.ks, cfg.styles.aggressive.kc, cfg.styles.aggressive.ke}},
      {"normal", {cfg.styles.normal.ks, cfg.styles.normal.kc, cfg.styles.normal.ke}},
      {"conservative",
       {cfg.styles.conservative.ks, cfg.styles.conservative.kc, cfg.styles.conservative.ke}}};
  doc["payoff_weights"] = {{"kv_log", cfg.payoff.kv_log},   {"ks_log", cfg.payoff.ks_log},
                           {"kv_lat", cfg.payoff.kv_lat},   {"ks_lat", cfg.payoff.ks_lat},
                           {"ky_lk", cfg.payoff.ky_lk},     {"kphi_lk", cfg.payoff.kphi_lk},
                           {"kax", cfg.payoff.kax},         {"kay", cfg.payoff.kay},
                           {"ke_inner", cfg.payoff.ke_inner}, {"epsilon", cfg.payoff.epsilon},
                           {"vx_max", cfg.payoff.vx_max},   {"d_far", cfg.payoff.d_far},
                           {"dv_cap", cfg.payoff.dv_cap},   {"dv_floor", cfg.payoff.dv_floor}};
  doc["mpc_weights"] = {{"q", cfg.mpc.q},
                        {"r_dax", cfg.mpc.r_dax},
                        {"r_ddelta", cfg.mpc.r_ddelta},
                        {"r_alpha", cfg.mpc.r_alpha},
                        {"r_beta", cfg.mpc.r_beta}};
  doc["constraints"] = {{"ds_max", cfg.bounds.ds_max},
                        {"dy_max", cfg.bounds.dy_max},
                        {"dphi_max_deg", cfg.bounds.dphi_max / kDegToRad},
                        {"ax_max", cfg.bounds.ax_max},
                        {"ay_max", cfg.bounds.ay_max},
                        {"vx_max", cfg.bounds.vx_max},
                        {"dax_max", cfg.bounds.dax_max},
                        {"ddelta_max_deg", cfg.bounds.ddelta_max / kDegToRad},
                        {"delta_max_deg", cfg.bounds.delta_max / kDegToRad},
                        {"enforce_station_bound", cfg.bounds.enforce_station_bound}};
  doc["vehicle_defaults"] = {{"lf", cfg.vehicle_defaults.lf},
                             {"lr", cfg.vehicle_defaults.lr},
                             {"lv", cfg.vehicle_defaults.lv}};
  doc["agents"] = ordered_json::array();
  for (const auto& a : cfg.agents) {
    doc["agents"].push_back({{"id", a.id},
                             {"style", to_string(a.style)},
                             {"x", a.x},
                             {"y", a.y},
                             {"vx", a.vx},
                             {"entry", std::string(1, a.route.entry_port)},
                             {"exit", std::string(1, a.route.exit_port)},
                             {"spawn_lane", a.spawn_lane},
                             {"lf", a.params.lf},
                             {"lr", a.params.lr},
                             {"lv", a.params.lv}});
  }
  return doc.dump(2) + "\n";
}

std::vector<VehicleAgent> instantiate_agents(const ScenarioConfig& cfg,
                                             const RoundaboutGeometry& geo) {
  std::vector<VehicleAgent> agents;
  for (const auto& seed : cfg.agents) {
    VehicleAgent a;
    a.id = seed.id;
    a.style = seed.style;
    a.route = seed.route;
    a.params = seed.params;

    std::string lane_id = seed.spawn_lane;
    if (lane_id.empty()) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& [id, lane] : geo.lanes()) {
        const double d = lane.lateral_distance(seed.x, seed.y);
        if (d < best) {
          best = d;
          lane_id = id;
        }
      }
    }
    if (!geo.has_lane(lane_id)) {
      throw std::runtime_error("agent '" + seed.id + "': unknown spawn lane '" + lane_id + "'");
    }
    const LaneRef& lane = geo.lane(lane_id);
    if (lane.lateral_distance(seed.x, seed.y) > lane.capture_range()) {
      throw std::runtime_error("agent '" + seed.id + "' spawns outside capture range of lane '" +
                               lane_id + "'");
    }

    // Heading and steering start in steady tracking of the spawn lane.
    const LanePose pose = lane.project(seed.x, seed.y, 0.0);
    const double kappa = lane.curvature_at(pose.s);
    const double beta_ss = std::asin(std::clamp(a.params.lr * kappa, -1.0, 1.0));
    const double delta_ss =
        std::atan(std::tan(beta_ss) * (a.params.lf + a.params.lr) / a.params.lr);
    a.state = VehicleState{seed.vx, wrap_angle(lane.tangent_angle_at(pose.s) - beta_ss), seed.x,
                           seed.y};
    a.prev_control = ControlInput{0.0, delta_ss};
    a.lane_current = lane_id;
    a.lane_target = lane_id;
    a.active = true;
    agents.push_back(std::move(a));
  }
  return agents;
}

Stage classify_stage(const VehicleAgent& agent, const RoundaboutGeometry& geo) {
  if (agent.lane_current.empty()) {
    throw std::runtime_error("agent '" + agent.id + "' has no lane association");
  }
  if (geo.is_inbound_lane(agent.lane_current)) return Stage::Entering;
  if (geo.is_outbound_lane(agent.lane_current)) return Stage::Exiting;
  if (geo.is_outbound_lane(agent.lane_target)) return Stage::Exiting;
  const LaneRef& ring = geo.lane(agent.lane_current);
  const double arc = arc_to_exit(agent, geo);
  const double threshold = geo.params().exit_threshold_deg * kDegToRad *
                           (ring.length() / (2.0 * M_PI));
  return arc <= threshold ? Stage::Exiting : Stage::Passing;
}

double arc_to_exit(const VehicleAgent& agent, const RoundaboutGeometry& geo) {
  const LaneRef& ring = geo.lane(agent.lane_current);
  if (!geo.is_ring_lane(agent.lane_current)) {
    throw std::runtime_error("arc_to_exit: agent '" + agent.id + "' is not on a ring lane");
  }
  const double radius = ring.length() / (2.0 * M_PI);
  const double theta = std::atan2(agent.state.y, agent.state.x);
  const double anchor = geo.port(agent.route.exit_port).exit_anchor;
  double diff = anchor - theta;
  diff = std::fmod(diff, 2.0 * M_PI);
  if (diff < 0.0) diff += 2.0 * M_PI;
  return diff * radius;
}

RoleMap assign_roles(const std::vector<VehicleAgent>& agents, size_t ego_index,
                     const RoundaboutGeometry& geo) {
  const VehicleAgent& ego = agents.at(ego_index);
  RoleMap roles;

  const LaneRef& ego_lane = geo.lane(ego.lane_current);
  const auto ego_pose = ego_lane.try_project(ego.state.x, ego.state.y, ego.state.phi);
  if (!ego_pose) {
    throw std::runtime_error("agent '" + ego.id + "' lost lane '" + ego.lane_current + "'");
  }
  const Stage stage = classify_stage(ego, geo);

  std::vector<char> taken(agents.size(), 0);
  taken[ego_index] = 1;
  for (size_t i = 0; i < agents.size(); ++i) {
    if (!agents[i].active) taken[i] = 1;
  }

  // Leader: nearest active agent ahead on the same lane.
  {
    double best_gap = kLeaderWindow;
    for (size_t i = 0; i < agents.size(); ++i) {
      if (taken[i] || agents[i].lane_current != ego.lane_current) continue;
      const auto pose =
          ego_lane.try_project(agents[i].state.x, agents[i].state.y, agents[i].state.phi);
      if (!pose) continue;
      const double gap = ego_lane.forward_gap(ego_pose->s, pose->s);
      if (gap > 0.0 && (gap < best_gap ||
                        (gap == best_gap && roles.lv >= 0 && agents[i].id < agents[roles.lv].id))) {
        best_gap = gap;
        roles.lv = static_cast<int>(i);
      }
    }
    if (roles.lv >= 0) taken[roles.lv] = 1;
  }

  auto pick_best = [&](auto&& scorer, int slot) {
    double best = std::numeric_limits<double>::infinity();
    int chosen = -1;
    for (size_t i = 0; i < agents.size(); ++i) {
      if (taken[i]) continue;
      const auto score = scorer(agents[i]);
      if (!score) continue;
      if (*score < best || (*score == best && chosen >= 0 && agents[i].id < agents[chosen].id)) {
        best = *score;
        chosen = static_cast<int>(i);
      }
    }
    if (chosen >= 0) {
      roles.nv[slot] = chosen;
      taken[chosen] = 1;
    }
  };

  if (stage == Stage::Entering) {
    const char port = ego.route.entry_port;
    const bool ego_inner = ego.lane_current == RoundaboutGeometry::inbound_lane_id(port, true);
    const std::string other_lane_id = RoundaboutGeometry::inbound_lane_id(port, !ego_inner);

    // Adjacent inbound vehicle.
    pick_best(
        [&](const VehicleAgent& a) -> std::optional<double> {
          if (a.lane_current != other_lane_id) return std::nullopt;
          const auto pose = geo.lane(other_lane_id)
                                .try_project(a.state.x, a.state.y, a.state.phi);
          if (!pose) return std::nullopt;
          const double ds = std::abs(pose->s - ego_pose->s);
          if (ds > kAdjacentWindow) return std::nullopt;
          return ds;
        },
        0);

    // Ring vehicles approaching the merge zone, ranked by time-to-conflict.
    for (int slot = 1; slot <= 2; ++slot) {
      const bool inner_ring = (slot == 2);
      const std::string ring_id = RoundaboutGeometry::ring_lane_id(inner_ring);
      const LaneRef& ring = geo.lane(ring_id);
      const double radius = ring.length() / (2.0 * M_PI);
      const double s_cross = [&] {
        const double s_line = line_circle_crossing_s(ego_lane, radius);
        const Vec2 cross = ego_lane.point_at(s_line);
        return ring_station_at_angle(ring, std::atan2(cross.y(), cross.x()));
      }();
      pick_best(
          [&](const VehicleAgent& a) -> std::optional<double> {
            if (a.lane_current != ring_id) return std::nullopt;
            const auto pose = ring.try_project(a.state.x, a.state.y, a.state.phi);
            if (!pose) return std::nullopt;
            const double gap = ring.forward_gap(pose->s, s_cross);
            if (gap < -kConflictBehindSlack || gap > kConflictArcWindow) return std::nullopt;
            return gap / std::max(a.state.vx, 0.5);
          },
          slot);
    }
  } else if (geo.is_ring_lane(ego.lane_current)) {
    const bool ego_inner = ego.lane_current == RoundaboutGeometry::ring_lane_id(true);
    const std::string adjacent_id = RoundaboutGeometry::ring_lane_id(!ego_inner);
    const LaneRef& adjacent = geo.lane(adjacent_id);
    const double theta_ego = std::atan2(ego.state.y, ego.state.x);

    // Occupant of the lane-change target lane, nearest by arc.
    pick_best(
        [&](const VehicleAgent& a) -> std::optional<double> {
          if (a.lane_current != adjacent_id) return std::nullopt;
          const auto pose = adjacent.try_project(a.state.x, a.state.y, a.state.phi);
          if (!pose) return std::nullopt;
          const double s_ego_adj = ring_station_at_angle(adjacent, theta_ego);
          const double gap = std::abs(adjacent.forward_gap(s_ego_adj, pose->s));
          if (gap > kAdjacentWindow) return std::nullopt;
          return gap;
        },
        0);

    // Approaching merger whose entry crossing lies ahead of ego.
    const LaneRef& ego_ring = ego_lane;
    pick_best(
        [&](const VehicleAgent& a) -> std::optional<double> {
          if (!geo.is_inbound_lane(a.lane_current)) return std::nullopt;
          const LaneRef& in_lane = geo.lane(a.lane_current);
          const auto pose = in_lane.try_project(a.state.x, a.state.y, a.state.phi);
          if (!pose) return std::nullopt;
          const double remaining = in_lane.length() - pose->s;
          if (remaining > kMergerDistanceWindow) return std::nullopt;
          const Vec2 cross = in_lane.point_at(in_lane.length());
          const double s_cross =
              ring_station_at_angle(ego_ring, std::atan2(cross.y(), cross.x()));
          const double s_ego = ego_pose->s;
          const double arc_ahead = ego_ring.forward_gap(s_ego, s_cross);
          if (arc_ahead < -kConflictBehindSlack || arc_ahead > kConflictArcWindow)
            return std::nullopt;
          return remaining / std::max(a.state.vx, 0.5);
        },
        1);
  }

  for (size_t i = 0; i < agents.size(); ++i) {
    if (i == ego_index || !agents[i].active) continue;
    const int idx = static_cast<int>(i);
    if (roles.lv == idx || roles.nv[0] == idx || roles.nv[1] == idx || roles.nv[2] == idx)
      continue;
    roles.iv.push_back(idx);
  }
  return roles;
}

AgentDecisionContext decision_context(const VehicleAgent& agent, const RoundaboutGeometry& geo) {
  AgentDecisionContext ctx;
  ctx.stage = classify_stage(agent, geo);
  ctx.lane_current = agent.lane_current;

  const auto keep = [&](const std::string& lane) {
    return BehaviorOption{Behavior{0, 0}, lane};
  };

  if (ctx.stage == Stage::Entering) {
    ctx.options.push_back(keep(agent.lane_current));
    ctx.options.push_back({Behavior{-1, 0}, RoundaboutGeometry::ring_lane_id(true)});
    ctx.options.push_back({Behavior{+1, 0}, RoundaboutGeometry::ring_lane_id(false)});
    ctx.merge_stop_point = geo.inbound_stop_point(agent.lane_current);
    return ctx;
  }

  if (geo.is_outbound_lane(agent.lane_current)) {
    ctx.options.push_back(keep(agent.lane_current));
    return ctx;
  }
  if (geo.is_outbound_lane(agent.lane_target)) {
    // Exit transition already committed; hold the outbound target.
    ctx.exit_commit = true;
    ctx.options.push_back({Behavior{0, agent.prev_behavior.beta}, agent.lane_target});
    return ctx;
  }

  const bool on_inner = agent.lane_current == RoundaboutGeometry::ring_lane_id(true);
  if (ctx.stage == Stage::Passing) {
    ctx.options.push_back(keep(agent.lane_current));
    if (on_inner) {
      ctx.options.push_back({Behavior{0, +1}, RoundaboutGeometry::ring_lane_id(false)});
    } else {
      ctx.options.push_back({Behavior{0, -1}, RoundaboutGeometry::ring_lane_id(true)});
    }
    return ctx;
  }

  // Exiting on the ring.
  const LaneRef& ring = geo.lane(agent.lane_current);
  const double radius = ring.length() / (2.0 * M_PI);
  const double commit_arc = geo.params().exit_commit_deg * kDegToRad * radius;
  ctx.exit_commit = arc_to_exit(agent, geo) <= commit_arc;
  const char port = agent.route.exit_port;
  if (on_inner) {
    // The exit requires the outer ring; the rightward change is mandatory.
    if (ctx.exit_commit) {
      ctx.options.push_back({Behavior{0, +1}, RoundaboutGeometry::outbound_lane_id(port, true)});
    } else {
      ctx.options.push_back({Behavior{0, +1}, RoundaboutGeometry::ring_lane_id(false)});
    }
  } else {
    if (ctx.exit_commit) {
      ctx.options.push_back({Behavior{0, 0}, RoundaboutGeometry::outbound_lane_id(port, true)});
      ctx.options.push_back({Behavior{0, +1}, RoundaboutGeometry::outbound_lane_id(port, false)});
    } else {
      ctx.options.push_back(keep(agent.lane_current));
    }
  }
  return ctx;
}

void update_lane_association(VehicleAgent& agent, const RoundaboutGeometry& geo) {
  if (agent.lane_target.empty() || agent.lane_target == agent.lane_current) return;
  const double d_cur =
      geo.lane(agent.lane_current).lateral_distance(agent.state.x, agent.state.y);
  const double d_tgt =
      geo.lane(agent.lane_target).lateral_distance(agent.state.x, agent.state.y);
  if (d_tgt < d_cur) {
    agent.lane_current = agent.lane_target;
  }
}

std::optional<double> exit_travel(const VehicleAgent& agent, const RoundaboutGeometry& geo) {
  if (!geo.is_outbound_lane(agent.lane_current)) return std::nullopt;
  const LaneRef& lane = geo.lane(agent.lane_current);
  const auto pose = lane.try_project(agent.state.x, agent.state.y, agent.state.phi);
  if (!pose) return std::nullopt;
  return pose->s;
}

}  // namespace cavsim
