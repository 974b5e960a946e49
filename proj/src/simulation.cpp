#include "cavsim/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#ifdef CAVSIM_HAVE_OPENMP
#include <omp.h>
#endif

namespace cavsim {

namespace {

constexpr double kRouteCompletionDistance = 20.0;

struct EpochResult {
  bool valid = false;
  GameOutcome outcome;
  DecisionSequence sequence;
  Behavior behavior;
  std::string target_lane;
  Stage stage = Stage::Passing;
  std::string lv_id;
  std::array<std::string, 3> nv_id;
  PayoffBreakdown payoff;
  bool fallback = false;
  double wall_s = 0.0;
  long evaluated = 0;
  long infeasible = 0;
  DominanceSample dominance;
  bool has_dominance = false;
  std::string error;
};

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double idx = q * (static_cast<double>(v.size()) - 1.0);
  const size_t lo = static_cast<size_t>(std::floor(idx));
  const size_t hi = static_cast<size_t>(std::ceil(idx));
  const double w = idx - static_cast<double>(lo);
  return v[lo] * (1.0 - w) + v[hi] * w;
}

}  // namespace

SimulationLog run(const ScenarioConfig& cfg, const SimOptions& options) {
  const RoundaboutGeometry geo(cfg.geometry);
  std::vector<VehicleAgent> agents = instantiate_agents(cfg, geo);

  SimulationLog log;
  log.scenario_name = cfg.name;
  log.solver = cfg.solver;
  log.dt = cfg.horizon.dt;
  for (const auto& a : agents) log.agent_ids.push_back(a.id);

  const int max_steps = static_cast<int>(std::ceil(cfg.duration_s / cfg.horizon.dt));
  const int n_agents = static_cast<int>(agents.size());

  for (int step = 0; step < max_steps; ++step) {
    const double t = step * cfg.horizon.dt;

    std::vector<int> active_idx;
    for (int i = 0; i < n_agents; ++i) {
      if (agents[i].active) active_idx.push_back(i);
    }
    if (active_idx.empty()) break;

    // Decision epochs against the step-start snapshot.
    const std::vector<VehicleAgent> snapshot = agents;
    std::vector<EpochResult> results(active_idx.size());

    auto run_epoch = [&](size_t j) {
      EpochResult& r = results[j];
      const size_t ego = static_cast<size_t>(active_idx[j]);
      try {
        const auto t0 = std::chrono::steady_clock::now();
        const EpochProblem problem = build_epoch(snapshot, ego, cfg, geo);
        // Inner solver parallelism stays off; the agent loop is the
        // parallel dimension.
        GameOutcome outcome = cfg.solver == SolverKind::GrandCoalition
                                  ? solve_grand_coalition(problem.instance())
                                  : solve_stackelberg(problem.instance());
        r.wall_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        const EpochPlayer& ego_player = problem.players().front();
        const int chosen = outcome.chosen[0];
        const Candidate& cand = problem.candidate_of(0, chosen);
        r.sequence = problem.sequence_of(0, chosen);
        r.behavior = cand.behavior;
        r.stage = ego_player.stage;
        for (const auto& opt : ego_player.dctx.options) {
          if (opt.behavior == cand.behavior) r.target_lane = opt.target_lane;
        }
        r.lv_id = ego_player.roles.lv >= 0 ? snapshot[ego_player.roles.lv].id : "";
        for (int s = 0; s < 3; ++s) {
          r.nv_id[s] = ego_player.roles.nv[s] >= 0 ? snapshot[ego_player.roles.nv[s]].id : "";
        }
        r.payoff = problem.breakdown_at(0, outcome.chosen, 0);
        r.fallback = outcome.ego_fallback;
        r.evaluated = outcome.evaluated;
        r.infeasible = outcome.infeasible;

        if (options.dominance_audit) {
          const GameOutcome sg = cfg.solver == SolverKind::Stackelberg
                                     ? outcome
                                     : solve_stackelberg(problem.instance());
          const GameOutcome gc = cfg.solver == SolverKind::GrandCoalition
                                     ? outcome
                                     : solve_grand_coalition(problem.instance());
          double sg_weighted = 0.0;
          const auto& omega = problem.instance().omega;
          for (size_t p = 0; p < sg.pi.size(); ++p) sg_weighted += omega[p] * sg.pi[p];
          r.dominance = DominanceSample{step, snapshot[ego].id, gc.objective, sg_weighted,
                                        sg.ego_fallback || gc.ego_fallback};
          r.has_dominance = true;
        }
        r.valid = true;
      } catch (const std::exception& e) {
        r.error = e.what();
      }
    };

    if (options.policy == ExecutionPolicy::Parallel) {
#ifdef CAVSIM_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic)
      for (size_t j = 0; j < active_idx.size(); ++j) run_epoch(j);
#else
      for (size_t j = 0; j < active_idx.size(); ++j) run_epoch(j);
#endif
    } else {
      for (size_t j = 0; j < active_idx.size(); ++j) run_epoch(j);
    }

    // Apply decisions, log, integrate.
    for (size_t j = 0; j < active_idx.size(); ++j) {
      const int i = active_idx[j];
      EpochResult& r = results[j];
      if (!r.valid) {
        log.abort_reason = "agent '" + agents[i].id + "': " + r.error;
        return log;
      }
      VehicleAgent& agent = agents[i];

      const ControlDelta du = r.sequence.deltas.front();
      agent.prev_control.ax += du.d_ax;
      agent.prev_control.delta_f += du.d_delta_f;
      agent.prev_deltas = r.sequence.deltas;
      agent.prev_behavior = r.behavior;
      agent.lane_target = r.target_lane;

      // Ratchet the maneuver funnel toward the committed target.
      const LaneRef& target = geo.lane(agent.lane_target);
      const LanePose pose =
          target.project_raw(agent.state.x, agent.state.y, agent.state.phi);
      if (agent.funnel_anchor_lane == agent.lane_target) {
        agent.funnel_anchor_dy = std::min(agent.funnel_anchor_dy, std::abs(pose.dy));
        agent.funnel_anchor_dphi = std::min(agent.funnel_anchor_dphi, std::abs(pose.dphi));
      } else {
        agent.funnel_anchor_lane = agent.lane_target;
        agent.funnel_anchor_dy = std::abs(pose.dy);
        agent.funnel_anchor_dphi = std::abs(pose.dphi);
      }

      StepRecord rec;
      rec.step = step;
      rec.t = t;
      rec.agent_id = agent.id;
      rec.state = snapshot[i].state;
      rec.applied = agent.prev_control;
      rec.decision = DecisionVector{du.d_ax, du.d_delta_f, r.behavior.alpha, r.behavior.beta};
      rec.ay = lateral_acceleration(snapshot[i].state.vx, agent.prev_control.delta_f,
                                    agent.params);
      rec.stage = r.stage;
      rec.lane = snapshot[i].lane_current;
      rec.lv_id = r.lv_id;
      rec.nv_id = r.nv_id;
      rec.payoff = r.payoff;
      rec.feasible = !r.fallback;
      rec.solve_wall_s = r.wall_s;
      rec.candidates_evaluated = r.evaluated;
      rec.infeasible_candidates = r.infeasible;
      log.records.push_back(std::move(rec));
      if (r.fallback) log.fallback_used = true;
      if (r.has_dominance) log.dominance.push_back(r.dominance);
    }

    // Plant update and lane bookkeeping.
    for (int i : active_idx) {
      VehicleAgent& agent = agents[i];
      agent.state = integrate_plant(agent.state, agent.prev_control, agent.params,
                                    cfg.horizon.dt);
      update_lane_association(agent, geo);
      if (const auto travel = exit_travel(agent, geo);
          travel && *travel >= kRouteCompletionDistance) {
        agent.active = false;
        continue;
      }
      const LaneRef& lane = geo.lane(agent.lane_current);
      if (!lane.try_project(agent.state.x, agent.state.y, agent.state.phi)) {
        log.abort_reason = "agent '" + agent.id + "' left the capture range of lane '" +
                           agent.lane_current + "'";
        return log;
      }
    }

    // Collision check on the post-integration states.
    for (size_t a = 0; a < agents.size() && !log.collision; ++a) {
      if (!agents[a].active) continue;
      for (size_t b = a + 1; b < agents.size(); ++b) {
        if (!agents[b].active) continue;
        const double dist = std::hypot(agents[a].state.x - agents[b].state.x,
                                       agents[a].state.y - agents[b].state.y);
        if (dist < 0.5 * (agents[a].params.lv + agents[b].params.lv)) {
          log.collision = true;
          log.collision_a = agents[a].id;
          log.collision_b = agents[b].id;
          log.collision_time = t + cfg.horizon.dt;
          break;
        }
      }
    }
    if (log.collision) break;
  }

  return log;
}

MetricsReport metrics(const SimulationLog& log) {
  MetricsReport report;
  if (log.records.empty()) {
    throw std::invalid_argument("metrics: empty simulation log");
  }

  std::map<std::string, std::vector<const StepRecord*>> by_agent;
  for (const auto& rec : log.records) by_agent[rec.agent_id].push_back(&rec);

  double pooled_sq = 0.0;
  long pooled_n = 0;
  double wall_sum = 0.0;

  // Pairwise gaps need same-step states.
  std::map<int, std::vector<const StepRecord*>> by_step;
  for (const auto& rec : log.records) by_step[rec.step].push_back(&rec);
  std::map<std::string, std::map<std::string, double>> min_gap;
  for (const auto& [step, recs] : by_step) {
    for (size_t a = 0; a < recs.size(); ++a) {
      for (size_t b = a + 1; b < recs.size(); ++b) {
        const double dist = std::hypot(recs[a]->state.x - recs[b]->state.x,
                                       recs[a]->state.y - recs[b]->state.y);
        auto upd = [&](const std::string& i, const std::string& j) {
          auto it = min_gap[i].find(j);
          if (it == min_gap[i].end() || dist < it->second) min_gap[i][j] = dist;
        };
        upd(recs[a]->agent_id, recs[b]->agent_id);
        upd(recs[b]->agent_id, recs[a]->agent_id);
      }
    }
  }

  for (const std::string& id : log.agent_ids) {
    auto it = by_agent.find(id);
    if (it == by_agent.end()) continue;
    const auto& recs = it->second;
    AgentMetrics am;
    am.id = id;
    std::vector<double> ax, ay;
    double sq = 0.0;
    for (const StepRecord* r : recs) {
      am.vx_max = std::max(am.vx_max, r->state.vx);
      sq += r->state.vx * r->state.vx;
      ax.push_back(r->applied.ax);
      ay.push_back(r->ay);
      wall_sum += r->solve_wall_s;
      ++report.epochs;
    }
    pooled_sq += sq;
    pooled_n += static_cast<long>(recs.size());
    am.vx_rms = std::sqrt(sq / static_cast<double>(recs.size()));
    am.ax = QuartileSummary{quantile(ax, 0.0), quantile(ax, 0.25), quantile(ax, 0.5),
                            quantile(ax, 0.75), quantile(ax, 1.0)};
    am.ay = QuartileSummary{quantile(ay, 0.0), quantile(ay, 0.25), quantile(ay, 0.5),
                            quantile(ay, 0.75), quantile(ay, 1.0)};
    am.min_gap = min_gap[id];
    report.agents.push_back(std::move(am));
  }

  report.system_vx_rms = std::sqrt(pooled_sq / static_cast<double>(pooled_n));
  report.mean_solve_time_s = report.epochs > 0 ? wall_sum / report.epochs : 0.0;
  return report;
}

}  // namespace cavsim
