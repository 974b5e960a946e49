#include "cavsim/epoch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace cavsim {

namespace {

constexpr int kEgoOpponent = -2;
constexpr int kMaxHorizon = 64;
// Sustainable deceleration assumed by the yield rule at lane ends.
constexpr double kYieldDecel = 1.5;

struct TrajData {
  std::vector<VehicleState> states;
  std::vector<double> ax;
  std::vector<double> delta_f;
  std::vector<double> ay;
};

struct LaneErrData {
  std::vector<double> dy;
  std::vector<double> dphi;
  std::vector<double> s;
};

enum class TermKind { Absent, Frozen, Pair };

struct SlotTable {
  TermKind kind = TermKind::Absent;
  double absent_value = 0.0;
  int pair_opponent = -1;  // follower index for the ego; kEgoOpponent for followers
  std::vector<std::vector<double>> frozen;             // [delta][p]
  std::vector<std::vector<std::vector<double>>> pair;  // [delta][delta_opp][p]
  int frozen_alpha = 0;
};

struct PlayerTables {
  std::vector<ControlDelta> deltas;
  std::vector<int> cand_delta;
  std::vector<int> cand_lane;
  std::vector<TrajData> traj;                        // [delta]
  std::vector<std::string> lanes;                    // distinct candidate target lanes
  std::vector<std::vector<LaneErrData>> lane_err;    // [lane][delta]
  std::vector<std::vector<std::vector<double>>> lk;  // [lane][delta][p]
  TermKind lv_kind = TermKind::Absent;
  double lv_absent = 0.0;
  std::vector<std::vector<double>> lv_frozen;             // [delta][p]
  std::vector<std::vector<std::vector<double>>> lv_pair;  // [delta][delta_ego][p]
  std::array<SlotTable, 3> slots;
  StyleWeights style;
  Stage stage = Stage::Passing;
};

struct Storage {
  std::vector<PlayerTables> tables;
  std::vector<std::vector<Candidate>> cands;
  std::array<int, 3> slot_follower{-1, -1, -1};
  PayoffWeights w;
  MpcCostWeights mw;
  int np = 0;
  int nc = 0;
};

double player_cost(const Storage& S, int player, int cand, const std::array<int, 3>& opp_delta,
                   int merger_alpha, int lv_opp_delta) {
  const PlayerTables& T = S.tables[player];
  const Candidate& c = S.cands[player][cand];
  const int d = T.cand_delta[cand];
  const int lane = T.cand_lane[cand];
  const TrajData& traj = T.traj[d];

  double payoffs[kMaxHorizon];
  for (int p = 0; p < S.np; ++p) {
    SafetyTerms terms;
    terms.p_lk = T.lk[lane][d][p];
    switch (T.lv_kind) {
      case TermKind::Absent: terms.p_log = T.lv_absent; break;
      case TermKind::Frozen: terms.p_log = T.lv_frozen[d][p]; break;
      case TermKind::Pair: terms.p_log = T.lv_pair[d][lv_opp_delta][p]; break;
    }
    for (int s = 0; s < 3; ++s) {
      const SlotTable& slot = T.slots[s];
      switch (slot.kind) {
        case TermKind::Absent: terms.p_lat[s] = slot.absent_value; break;
        case TermKind::Frozen: terms.p_lat[s] = slot.frozen[d][p]; break;
        case TermKind::Pair: terms.p_lat[s] = slot.pair[d][opp_delta[s]][p]; break;
      }
    }
    payoffs[p] = total_payoff_step(T.stage, c.behavior, terms, merger_alpha, traj.ax[p],
                                   traj.ay[p], traj.states[p].vx, T.style, S.w)
                     .total;
  }
  return mpc_cost_from_payoffs(std::span<const double>(payoffs, S.np), c, S.nc, S.mw);
}

// Alpha of the merger slot as seen by `player` for the given ego candidate.
int resolve_merger_alpha(const Storage& S, int player, int ego_cand,
                         const std::vector<int>* follower_choices) {
  const SlotTable& slot = S.tables[player].slots[1];
  switch (slot.kind) {
    case TermKind::Absent: return 0;
    case TermKind::Frozen: return slot.frozen_alpha;
    case TermKind::Pair: break;
  }
  if (slot.pair_opponent == kEgoOpponent) {
    return S.cands[0][ego_cand].behavior.alpha;
  }
  if (follower_choices) {
    const int f = slot.pair_opponent;
    return S.cands[f + 1][(*follower_choices)[f]].behavior.alpha;
  }
  return 0;
}

int find_fallback(const std::vector<Candidate>& cands, const Behavior& behavior,
                  double dax_max) {
  int best = 0;
  double best_key = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < cands.size(); ++i) {
    if (!(cands[i].behavior == behavior)) continue;
    const double key =
        std::abs(cands[i].delta.d_delta_f) * 1e3 + std::abs(cands[i].delta.d_ax + dax_max);
    if (key < best_key) {
      best_key = key;
      best = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace

const Candidate& EpochProblem::candidate_of(int player, int cand) const {
  return players_.at(player).candidates.at(cand);
}

DecisionSequence EpochProblem::sequence_of(int player, int cand) const {
  return candidate_of(player, cand).sequence(nc_);
}

PayoffBreakdown EpochProblem::breakdown_at(int player, const std::vector<int>& profile,
                                           int step) const {
  const auto& S = *static_cast<const Storage*>(tables_.get());
  const PlayerTables& T = S.tables[player];
  const int cand = profile.at(player);
  const Candidate& c = S.cands[player][cand];
  const int d = T.cand_delta[cand];
  const int lane = T.cand_lane[cand];

  std::array<int, 3> opp_delta{-1, -1, -1};
  int lv_opp_delta = -1;
  if (player == 0) {
    for (int s = 0; s < 3; ++s) {
      const int f = S.slot_follower[s];
      if (f >= 0 && T.slots[s].kind == TermKind::Pair) {
        opp_delta[s] = S.tables[f + 1].cand_delta[profile.at(f + 1)];
      }
    }
  } else {
    for (int s = 0; s < 3; ++s) {
      if (T.slots[s].kind == TermKind::Pair) opp_delta[s] = S.tables[0].cand_delta[profile.at(0)];
    }
    if (T.lv_kind == TermKind::Pair) lv_opp_delta = S.tables[0].cand_delta[profile.at(0)];
  }
  std::vector<int> follower_choices(profile.begin() + 1, profile.end());
  const int merger_alpha =
      resolve_merger_alpha(S, player, profile.at(0), player == 0 ? &follower_choices : nullptr);

  SafetyTerms terms;
  terms.p_lk = T.lk[lane][d][step];
  switch (T.lv_kind) {
    case TermKind::Absent: terms.p_log = T.lv_absent; break;
    case TermKind::Frozen: terms.p_log = T.lv_frozen[d][step]; break;
    case TermKind::Pair: terms.p_log = T.lv_pair[d][lv_opp_delta][step]; break;
  }
  for (int s = 0; s < 3; ++s) {
    const SlotTable& slot = T.slots[s];
    switch (slot.kind) {
      case TermKind::Absent: terms.p_lat[s] = slot.absent_value; break;
      case TermKind::Frozen: terms.p_lat[s] = slot.frozen[d][step]; break;
      case TermKind::Pair: terms.p_lat[s] = slot.pair[d][opp_delta[s]][step]; break;
    }
  }
  const TrajData& traj = T.traj[d];
  return total_payoff_step(T.stage, c.behavior, terms, merger_alpha, traj.ax[step],
                           traj.ay[step], traj.states[step].vx, T.style, S.w);
}

EpochProblem build_epoch(const std::vector<VehicleAgent>& agents, size_t ego_index,
                         const ScenarioConfig& cfg, const RoundaboutGeometry& geo) {
  const int np = cfg.horizon.np;
  const int nc = cfg.horizon.nc;
  if (np > kMaxHorizon) {
    throw std::invalid_argument("prediction horizon exceeds the supported maximum");
  }

  auto storage = std::make_shared<Storage>();
  Storage& S = *storage;
  S.w = cfg.payoff;
  S.mw = MpcCostWeights{cfg.mpc.q,       cfg.mpc.r_dax,  cfg.mpc.r_ddelta,
                        cfg.mpc.r_alpha, cfg.mpc.r_beta, cfg.payoff.epsilon};
  S.np = np;
  S.nc = nc;

  EpochProblem problem;
  problem.np_ = np;
  problem.nc_ = nc;

  // Group: ego plus the agents in its opponent slots, in slot order.
  const RoleMap ego_roles = assign_roles(agents, ego_index, geo);
  std::vector<int> member_agent{static_cast<int>(ego_index)};
  std::array<int, 3> slot_follower{-1, -1, -1};
  for (int s = 0; s < 3; ++s) {
    if (ego_roles.nv[s] >= 0) {
      slot_follower[s] = static_cast<int>(member_agent.size()) - 1;
      member_agent.push_back(ego_roles.nv[s]);
    }
  }
  S.slot_follower = slot_follower;
  const int n_players = static_cast<int>(member_agent.size());

  // Frozen trajectories of agents outside the game: leaders hold their
  // current control, others replay their previous-epoch decision.
  std::map<std::pair<int, bool>, std::vector<VehicleState>> frozen_cache;
  auto frozen_trajectory =
      [&](int agent_idx, bool replay_prev) -> const std::vector<VehicleState>& {
    const auto key = std::make_pair(agent_idx, replay_prev);
    auto it = frozen_cache.find(key);
    if (it != frozen_cache.end()) return it->second;
    const VehicleAgent& a = agents[agent_idx];
    const PredictionMatrices mats =
        build_prediction(a.state, a.prev_control, a.params, cfg.horizon);
    std::vector<ControlDelta> du(static_cast<size_t>(nc));
    if (replay_prev && static_cast<int>(a.prev_deltas.size()) == nc) du = a.prev_deltas;
    auto traj = predict_trajectory(make_augmented_state(a.state, a.prev_control), du, mats);
    return frozen_cache.emplace(key, std::move(traj)).first->second;
  };

  S.tables.resize(n_players);
  S.cands.resize(n_players);
  problem.players_.resize(n_players);

  // First pass: candidates, trajectories, lane errors, feasibility.
  for (int pl = 0; pl < n_players; ++pl) {
    const int agent_idx = member_agent[pl];
    const VehicleAgent& agent = agents[agent_idx];
    EpochPlayer& P = problem.players_[pl];
    PlayerTables& T = S.tables[pl];

    P.agent_index = agent_idx;
    P.dctx = decision_context(agent, geo);
    P.stage = P.dctx.stage;
    P.roles = (pl == 0) ? ego_roles : assign_roles(agents, agent_idx, geo);
    T.stage = P.stage;
    T.style = cfg.styles.of(agent.style);

    std::vector<Behavior> allowed;
    for (const auto& opt : P.dctx.options) allowed.push_back(opt.behavior);
    P.candidates = restrict_candidates(
        candidate_set(P.stage, cfg.bounds, cfg.grid.levels_ax, cfg.grid.levels_delta), allowed);
    S.cands[pl] = P.candidates;
    P.fallback = find_fallback(P.candidates, P.dctx.options.front().behavior, cfg.bounds.dax_max);

    // Distinct increments and their predicted trajectories.
    T.cand_delta.resize(P.candidates.size());
    for (size_t c = 0; c < P.candidates.size(); ++c) {
      const ControlDelta& d = P.candidates[c].delta;
      int found = -1;
      for (size_t k = 0; k < T.deltas.size(); ++k) {
        if (T.deltas[k].d_ax == d.d_ax && T.deltas[k].d_delta_f == d.d_delta_f) {
          found = static_cast<int>(k);
          break;
        }
      }
      if (found < 0) {
        found = static_cast<int>(T.deltas.size());
        T.deltas.push_back(d);
      }
      T.cand_delta[c] = found;
    }

    const PredictionMatrices mats =
        build_prediction(agent.state, agent.prev_control, agent.params, cfg.horizon);
    const Vec6 xi0 = make_augmented_state(agent.state, agent.prev_control);
    T.traj.resize(T.deltas.size());
    for (size_t k = 0; k < T.deltas.size(); ++k) {
      const std::vector<ControlDelta> du(static_cast<size_t>(nc), T.deltas[k]);
      TrajData& td = T.traj[k];
      td.states = predict_trajectory(xi0, du, mats);
      td.ax.resize(np);
      td.delta_f.resize(np);
      td.ay.resize(np);
      for (int p = 0; p < np; ++p) {
        const int held = std::min(p + 1, nc);
        td.ax[p] = agent.prev_control.ax + T.deltas[k].d_ax * held;
        td.delta_f[p] = agent.prev_control.delta_f + T.deltas[k].d_delta_f * held;
        td.ay[p] = lateral_acceleration(td.states[p].vx, td.delta_f[p], agent.params);
      }
    }

    // Candidate target lanes and error series against them.
    T.cand_lane.resize(P.candidates.size());
    auto lane_index = [&](const std::string& id) {
      for (size_t k = 0; k < T.lanes.size(); ++k) {
        if (T.lanes[k] == id) return static_cast<int>(k);
      }
      T.lanes.push_back(id);
      return static_cast<int>(T.lanes.size()) - 1;
    };
    for (size_t c = 0; c < P.candidates.size(); ++c) {
      const Behavior& b = P.candidates[c].behavior;
      const auto opt = std::find_if(P.dctx.options.begin(), P.dctx.options.end(),
                                    [&](const BehaviorOption& o) { return o.behavior == b; });
      T.cand_lane[c] = lane_index(opt->target_lane);
    }
    T.lane_err.resize(T.lanes.size());
    T.lk.resize(T.lanes.size());
    std::vector<LanePose> lane_pose_now(T.lanes.size());
    for (size_t ln = 0; ln < T.lanes.size(); ++ln) {
      const LaneRef& lane = geo.lane(T.lanes[ln]);
      lane_pose_now[ln] = lane.project_raw(agent.state.x, agent.state.y, agent.state.phi);
      T.lane_err[ln].resize(T.deltas.size());
      T.lk[ln].resize(T.deltas.size());
      for (size_t k = 0; k < T.deltas.size(); ++k) {
        LaneErrData& le = T.lane_err[ln][k];
        le.dy.resize(np);
        le.dphi.resize(np);
        le.s.resize(np);
        T.lk[ln][k].resize(np);
        for (int p = 0; p < np; ++p) {
          const VehicleState& st = T.traj[k].states[p];
          const LanePose pose = lane.project_raw(st.x, st.y, st.phi);
          le.dy[p] = pose.dy;
          le.dphi[p] = pose.dphi;
          le.s[p] = pose.s;
          T.lk[ln][k][p] = safety_lanekeep(pose.dy, pose.dphi, S.w);
        }
      }
    }

    // Feasibility.
    P.feasible.assign(P.candidates.size(), 0);
    for (size_t c = 0; c < P.candidates.size(); ++c) {
      const int d = T.cand_delta[c];
      const int ln = T.cand_lane[c];
      const LaneRef& lane = geo.lane(T.lanes[ln]);
      TrajectoryCheckInput in;
      in.dy = T.lane_err[ln][d].dy;
      in.dphi = T.lane_err[ln][d].dphi;
      in.station = T.lane_err[ln][d].s;
      in.vx.resize(np);
      for (int p = 0; p < np; ++p) in.vx[p] = T.traj[d].states[p].vx;
      in.ax = T.traj[d].ax;
      in.ay = T.traj[d].ay;
      in.delta_f = T.traj[d].delta_f;
      in.d_ax.assign(static_cast<size_t>(nc), P.candidates[c].delta.d_ax);
      in.d_delta_f.assign(static_cast<size_t>(nc), P.candidates[c].delta.d_delta_f);

      double dy0 = std::abs(lane_pose_now[ln].dy);
      double dphi0 = std::abs(lane_pose_now[ln].dphi);
      if (T.lanes[ln] == agent.funnel_anchor_lane) {
        dy0 = std::min(dy0, agent.funnel_anchor_dy);
        dphi0 = std::min(dphi0, agent.funnel_anchor_dphi);
      }
      in.dy0 = dy0;
      in.dphi0 = dphi0;
      in.station0 = lane_pose_now[ln].s;
      in.vx0 = agent.state.vx;
      in.dt = cfg.horizon.dt;
      in.station_wraps = lane.closed();
      in.lane_length = lane.length();

      ConstraintReport report = check(in, cfg.bounds);

      // Yield rule: a keep candidate on an inbound lane must stay on the lane
      // and be able to stop before its end.
      if (P.stage == Stage::Entering && P.candidates[c].behavior.alpha == 0 &&
          geo.is_inbound_lane(T.lanes[ln])) {
        for (int p = 0; p < np; ++p) {
          if (in.station[p] > lane.length()) {
            report.violations.push_back({"lane_end", in.station[p], lane.length(), p + 1});
          }
        }
        const double v_end = std::max(0.0, T.traj[d].states[np - 1].vx);
        const double remaining = lane.length() - in.station[np - 1];
        const double stop_dist = v_end * v_end / (2.0 * kYieldDecel);
        if (stop_dist > remaining) {
          report.violations.push_back({"lane_end", stop_dist, std::max(remaining, 0.0), np});
        }
        report.feasible = report.violations.empty();
      }
      P.feasible[c] = report.feasible ? 1 : 0;
    }
  }

  // Second pass: leader terms and lateral-slot tables.
  for (int pl = 0; pl < n_players; ++pl) {
    const int agent_idx = member_agent[pl];
    const VehicleAgent& agent = agents[agent_idx];
    EpochPlayer& P = problem.players_[pl];
    PlayerTables& T = S.tables[pl];
    const PlayerTables& ego_T = S.tables[0];

    auto pair_lv = [&](const VehicleAgent& other) {
      return 0.5 * (agent.params.lv + other.params.lv);
    };

    const int lv_idx = P.roles.lv;
    bool use_virtual = false;
    VehicleState virtual_leader;
    if (P.stage == Stage::Entering && P.dctx.merge_stop_point) {
      const Vec2 stop = *P.dctx.merge_stop_point;
      const double d_stop = std::hypot(agent.state.x - stop.x(), agent.state.y - stop.y());
      double d_lv = std::numeric_limits<double>::infinity();
      if (lv_idx >= 0) {
        d_lv = std::hypot(agent.state.x - agents[lv_idx].state.x,
                          agent.state.y - agents[lv_idx].state.y);
      }
      if (d_stop < d_lv) {
        use_virtual = true;
        virtual_leader = VehicleState{0.0, 0.0, stop.x(), stop.y()};
      }
    }
    if (use_virtual) {
      T.lv_kind = TermKind::Frozen;
      T.lv_frozen.resize(T.deltas.size());
      for (size_t k = 0; k < T.deltas.size(); ++k) {
        T.lv_frozen[k].resize(np);
        for (int p = 0; p < np; ++p) {
          T.lv_frozen[k][p] =
              safety_longitudinal(T.traj[k].states[p], virtual_leader, S.w, agent.params.lv);
        }
      }
    } else if (lv_idx < 0) {
      T.lv_kind = TermKind::Absent;
      T.lv_absent = safety_longitudinal_absent(S.w);
    } else if (pl > 0 && lv_idx == static_cast<int>(ego_index)) {
      // The ego leads this follower: couple through the ego candidate.
      T.lv_kind = TermKind::Pair;
      const double lv_len = pair_lv(agents[lv_idx]);
      T.lv_pair.resize(T.deltas.size());
      for (size_t k = 0; k < T.deltas.size(); ++k) {
        T.lv_pair[k].resize(ego_T.deltas.size());
        for (size_t ke = 0; ke < ego_T.deltas.size(); ++ke) {
          T.lv_pair[k][ke].resize(np);
          for (int p = 0; p < np; ++p) {
            T.lv_pair[k][ke][p] = safety_longitudinal(T.traj[k].states[p],
                                                      ego_T.traj[ke].states[p], S.w, lv_len);
          }
        }
      }
    } else {
      T.lv_kind = TermKind::Frozen;
      const auto& lv_traj = frozen_trajectory(lv_idx, false);
      const double lv_len = pair_lv(agents[lv_idx]);
      T.lv_frozen.resize(T.deltas.size());
      for (size_t k = 0; k < T.deltas.size(); ++k) {
        T.lv_frozen[k].resize(np);
        for (int p = 0; p < np; ++p) {
          T.lv_frozen[k][p] = safety_longitudinal(T.traj[k].states[p], lv_traj[p], S.w, lv_len);
        }
      }
    }

    for (int s = 0; s < 3; ++s) {
      SlotTable& slot = T.slots[s];
      const int opp_idx = P.roles.nv[s];
      if (opp_idx < 0) {
        slot.kind = TermKind::Absent;
        slot.absent_value = safety_lateral_absent(S.w);
        continue;
      }
      const VehicleAgent& opp = agents[opp_idx];
      const double lv_len = pair_lv(opp);
      const bool opp_is_ego = (pl > 0 && opp_idx == static_cast<int>(ego_index));
      int opp_follower = -1;
      if (pl == 0) {
        for (int s2 = 0; s2 < 3; ++s2) {
          if (ego_roles.nv[s2] == opp_idx) opp_follower = slot_follower[s2];
        }
      }
      if (opp_is_ego || opp_follower >= 0) {
        slot.kind = TermKind::Pair;
        slot.pair_opponent = opp_is_ego ? kEgoOpponent : opp_follower;
        const PlayerTables& opp_T = opp_is_ego ? ego_T : S.tables[opp_follower + 1];
        slot.pair.resize(T.deltas.size());
        for (size_t k = 0; k < T.deltas.size(); ++k) {
          slot.pair[k].resize(opp_T.deltas.size());
          for (size_t ko = 0; ko < opp_T.deltas.size(); ++ko) {
            slot.pair[k][ko].resize(np);
            for (int p = 0; p < np; ++p) {
              slot.pair[k][ko][p] = safety_lateral_pair(T.traj[k].states[p],
                                                        opp_T.traj[ko].states[p], S.w, lv_len);
            }
          }
        }
      } else {
        slot.kind = TermKind::Frozen;
        slot.frozen_alpha = opp.prev_behavior.alpha;
        const auto& opp_traj = frozen_trajectory(opp_idx, true);
        slot.frozen.resize(T.deltas.size());
        for (size_t k = 0; k < T.deltas.size(); ++k) {
          slot.frozen[k].resize(np);
          for (int p = 0; p < np; ++p) {
            slot.frozen[k][p] =
                safety_lateral_pair(T.traj[k].states[p], opp_traj[p], S.w, lv_len);
          }
        }
      }
    }
  }

  // Solver-facing instance.
  GameInstance& inst = problem.instance_;
  inst.n_players = n_players;
  inst.n_candidates.resize(n_players);
  inst.feasible.resize(n_players);
  inst.fallback.resize(n_players);
  for (int pl = 0; pl < n_players; ++pl) {
    inst.n_candidates[pl] = static_cast<int>(problem.players_[pl].candidates.size());
    inst.feasible[pl] = std::vector<char>(problem.players_[pl].feasible.begin(),
                                          problem.players_[pl].feasible.end());
    inst.fallback[pl] = problem.players_[pl].fallback;
  }

  const int n_followers = n_players - 1;
  inst.follower_cost.resize(n_followers);
  for (int f = 0; f < n_followers; ++f) {
    const int pl = f + 1;
    const PlayerTables& T = S.tables[pl];
    inst.follower_cost[f].resize(inst.n_candidates[0]);
    for (int e = 0; e < inst.n_candidates[0]; ++e) {
      const int de = S.tables[0].cand_delta[e];
      std::array<int, 3> opp_delta{-1, -1, -1};
      for (int s = 0; s < 3; ++s) {
        if (T.slots[s].kind == TermKind::Pair) opp_delta[s] = de;
      }
      const int lv_opp = (T.lv_kind == TermKind::Pair) ? de : -1;
      const int merger_alpha = resolve_merger_alpha(S, pl, e, nullptr);
      inst.follower_cost[f][e].resize(inst.n_candidates[pl]);
      for (int cf = 0; cf < inst.n_candidates[pl]; ++cf) {
        inst.follower_cost[f][e][cf] = player_cost(S, pl, cf, opp_delta, merger_alpha, lv_opp);
      }
    }
  }

  const Storage* sp = storage.get();
  inst.ego_cost = [sp](int e, const std::vector<int>& choices) {
    const Storage& st = *sp;
    std::array<int, 3> opp_delta{-1, -1, -1};
    for (int s = 0; s < 3; ++s) {
      const int f = st.slot_follower[s];
      if (f >= 0 && st.tables[0].slots[s].kind == TermKind::Pair) {
        opp_delta[s] = st.tables[f + 1].cand_delta[choices[f]];
      }
    }
    const int merger_alpha = resolve_merger_alpha(st, 0, e, &choices);
    return player_cost(st, 0, e, opp_delta, merger_alpha, -1);
  };

  inst.coupled.resize(inst.n_candidates[0]);
  for (int e = 0; e < inst.n_candidates[0]; ++e) {
    std::vector<int>& list = inst.coupled[e];
    const Behavior& b = S.cands[0][e].behavior;
    auto add_slot = [&](int s) {
      const int f = slot_follower[s];
      if (f >= 0 && std::find(list.begin(), list.end(), f) == list.end()) list.push_back(f);
    };
    if (S.tables[0].stage == Stage::Entering) {
      if (b.alpha == 1) {
        add_slot(0);
        add_slot(1);
      } else if (b.alpha == -1) {
        add_slot(1);
        add_slot(2);
      }
    } else {
      if (b.beta != 0) add_slot(0);
      add_slot(1);  // the merger gates itself through its own alpha
    }
    std::sort(list.begin(), list.end());
  }

  inst.visible_key.resize(n_followers);
  for (int f = 0; f < n_followers; ++f) {
    const int pl = f + 1;
    const bool alpha_visible = S.tables[0].stage != Stage::Entering && slot_follower[1] == f;
    inst.visible_key[f].resize(inst.n_candidates[pl]);
    for (int cf = 0; cf < inst.n_candidates[pl]; ++cf) {
      const int d = S.tables[pl].cand_delta[cf];
      const int a = alpha_visible ? (S.cands[pl][cf].behavior.alpha + 1) : 0;
      inst.visible_key[f][cf] = static_cast<long long>(d) * 4 + a;
    }
  }

  inst.omega.assign(n_players, 1.0 / n_players);

  problem.tables_ = std::shared_ptr<const void>(storage, storage.get());
  return problem;
}

}  // namespace cavsim
