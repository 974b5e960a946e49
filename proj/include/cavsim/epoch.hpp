#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cavsim/game.hpp"
#include "cavsim/payoff.hpp"
#include "cavsim/scenario.hpp"

// Builds the per-epoch decision game for one ego agent from an immutable
// snapshot of all agents. Every player in the group (the ego plus the
// agents in its lateral-opponent slots) gets its own stage, candidate set,
// frozen linearization, and payoff context; trajectories and pairwise
// payoff terms are tabulated once per distinct control increment so that
// the solvers' cost callbacks are cheap lookups.

namespace cavsim {

struct EpochPlayer {
  int agent_index = -1;
  Stage stage = Stage::Passing;
  AgentDecisionContext dctx;
  RoleMap roles;
  std::vector<Candidate> candidates;
  std::vector<char> feasible;
  int fallback = 0;
};

class EpochProblem {
 public:
  const GameInstance& instance() const { return instance_; }
  const std::vector<EpochPlayer>& players() const { return players_; }
  int np() const { return np_; }
  int nc() const { return nc_; }

  const Candidate& candidate_of(int player, int cand) const;
  DecisionSequence sequence_of(int player, int cand) const;
  // Fallback decision: strongest braking at the player's keep behavior.
  int fallback_of(int player) const { return players_.at(player).fallback; }

  // Payoff breakdown of a profile at one prediction step (0-based), from
  // the tabulated terms; used for logging the applied decision.
  PayoffBreakdown breakdown_at(int player, const std::vector<int>& profile, int step) const;

 private:
  friend EpochProblem build_epoch(const std::vector<VehicleAgent>&, size_t,
                                  const ScenarioConfig&, const RoundaboutGeometry&);
  GameInstance instance_;
  std::vector<EpochPlayer> players_;
  int np_ = 0;
  int nc_ = 0;
  std::shared_ptr<const void> tables_;  // keeps the cost-table storage alive
};

EpochProblem build_epoch(const std::vector<VehicleAgent>& agents, size_t ego_index,
                         const ScenarioConfig& cfg, const RoundaboutGeometry& geo);

}  // namespace cavsim
