#pragma once

#include <functional>
#include <span>
#include <vector>

#include "cavsim/constraints.hpp"
#include "cavsim/kinematics.hpp"
#include "cavsim/types.hpp"

// Per-epoch decision game. Player 0 is the ego/leader; the other players
// are its lateral opponents. Candidates are maneuver-plus-increment pairs
// held constant over the control horizon, enumerated in the deterministic
// tie-break order (keep behavior first, then smaller increments). Both
// solvers operate on an abstract cost instance so they can be checked
// against brute-force enumeration oracles.
//
// Coupling convention: a follower's cost depends on its own candidate and
// the ego candidate only (other players are held at their previous-epoch
// decisions); the ego cost depends on every follower the instance reports
// as coupled for the given ego candidate.

namespace cavsim {

struct DecisionVector {
  double d_ax = 0.0;
  double d_delta_f = 0.0;
  int alpha = 0;
  int beta = 0;
};

struct DecisionSequence {
  std::vector<ControlDelta> deltas;  // length nc
  Behavior behavior;                 // constant over the epoch

  DecisionVector at(int q) const {
    return {deltas.at(q).d_ax, deltas.at(q).d_delta_f, behavior.alpha, behavior.beta};
  }
};

// One search-set element: increments held constant over the control horizon.
struct Candidate {
  ControlDelta delta;
  Behavior behavior;

  DecisionSequence sequence(int nc) const {
    return {std::vector<ControlDelta>(static_cast<size_t>(nc), delta), behavior};
  }
  bool operator==(const Candidate&) const = default;
};

struct GridConfigFwd;  // see scenario.hpp for GridConfig

// Candidate enumeration for a stage: {behaviors valid at the stage} x
// {d_ax grid} x {d_delta_f grid}, sorted in tie-break order. Throws
// std::invalid_argument when a grid axis has fewer than 2 levels.
std::vector<Candidate> candidate_set(Stage stage, const ConstraintBounds& bounds,
                                     int levels_ax, int levels_delta);

// Restricts a candidate list to the behaviors allowed by the agent's lane
// context, preserving order.
std::vector<Candidate> restrict_candidates(const std::vector<Candidate>& candidates,
                                           std::span<const Behavior> allowed);

struct MpcCostWeights {
  double q = 1.0;
  double r_dax = 0.05;
  double r_ddelta = 1.0;
  double r_alpha = 0.01;
  double r_beta = 0.01;
  double epsilon = 0.01;  // regularizer of the payoff-to-cost map
};

// Performance value: q * sum_p (1/(P_p + eps))^2 plus the quadratic penalty
// on the decision vector over the control horizon.
double mpc_cost_from_payoffs(std::span<const double> per_step_payoff,
                             const Candidate& candidate, int nc, const MpcCostWeights& w);

struct GameInstance {
  int n_players = 1;
  std::vector<int> n_candidates;            // per player
  std::vector<std::vector<char>> feasible;  // [player][candidate]
  std::vector<int> fallback;                // per player: candidate used when nothing is feasible

  // follower_cost[f][e][cf]: cost of follower f+1 playing cf against ego e.
  std::vector<std::vector<std::vector<double>>> follower_cost;
  // Ego cost for candidate e against the follower choices (indexed by follower).
  std::function<double(int, const std::vector<int>&)> ego_cost;
  // Followers whose choice influences ego_cost for a given ego candidate.
  std::vector<std::vector<int>> coupled;
  // Equal keys mark follower candidates indistinguishable to the ego cost.
  std::vector<std::vector<long long>> visible_key;
  // Grand-coalition allocation, size n_players; empty means equal shares.
  std::vector<double> omega;
};

struct GameOutcome {
  std::vector<int> chosen;          // candidate index per player
  std::vector<double> pi;           // per-player cost at the chosen profile
  double objective = 0.0;           // minimax value (SG) or weighted sum (GC)
  std::vector<char> player_fallback;
  bool ego_fallback = false;
  long evaluated = 0;
  long infeasible = 0;
  double wall_s = 0.0;
};

enum class ExecutionPolicy { Serial, Parallel };

// Leader-follower solve: each follower best-responds to the leader
// candidate; the leader minimizes its worst case over the follower
// best-response sets. Deterministic: first minimum in candidate order wins.
GameOutcome solve_stackelberg(const GameInstance& g,
                              ExecutionPolicy policy = ExecutionPolicy::Serial);

// Joint solve of the weighted cost sum over the candidate product,
// exploiting that only the coupled followers interact with the ego cost.
GameOutcome solve_grand_coalition(const GameInstance& g,
                                  ExecutionPolicy policy = ExecutionPolicy::Serial);

}  // namespace cavsim
