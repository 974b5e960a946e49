#include "cavsim/game.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#ifdef CAVSIM_HAVE_OPENMP
#include <omp.h>
#endif

namespace cavsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> grid_values(int levels, double bound) {
  std::vector<double> v(levels);
  for (int i = 0; i < levels; ++i) {
    v[i] = -bound + 2.0 * bound * i / (levels - 1);
  }
  return v;
}

bool candidate_order(const Candidate& a, const Candidate& b) {
  const auto key = [](const Candidate& c) {
    const int nonzero = (c.behavior.alpha != 0 || c.behavior.beta != 0) ? 1 : 0;
    return std::make_tuple(nonzero, std::abs(c.delta.d_ax), std::abs(c.delta.d_delta_f),
                           c.delta.d_ax, c.delta.d_delta_f, c.behavior.alpha, c.behavior.beta);
  };
  return key(a) < key(b);
}

std::vector<char> feasible_or_default(const GameInstance& g, int player) {
  if (player < static_cast<int>(g.feasible.size())) return g.feasible[player];
  return std::vector<char>(g.n_candidates[player], 1);
}

std::vector<double> omega_or_equal(const GameInstance& g) {
  if (!g.omega.empty()) return g.omega;
  return std::vector<double>(g.n_players, 1.0 / g.n_players);
}

long long visible_key_of(const GameInstance& g, int follower, int cand) {
  if (follower < static_cast<int>(g.visible_key.size()) &&
      cand < static_cast<int>(g.visible_key[follower].size())) {
    return g.visible_key[follower][cand];
  }
  return cand;  // every candidate distinct
}

struct BestResponse {
  std::vector<int> set;  // argmin candidates in order; dedup applied separately
  bool fallback = false;
};

BestResponse best_response(const GameInstance& g, const std::vector<char>& feas, int follower,
                           int ego_cand) {
  BestResponse br;
  const auto& row = g.follower_cost[follower][ego_cand];
  double best = kInf;
  for (int cf = 0; cf < g.n_candidates[follower + 1]; ++cf) {
    if (!feas[cf]) continue;
    const double c = row[cf];
    if (c < best) {
      best = c;
      br.set.clear();
      br.set.push_back(cf);
    } else if (c == best) {
      br.set.push_back(cf);
    }
  }
  if (br.set.empty()) {
    br.set.push_back(g.fallback[follower + 1]);
    br.fallback = true;
  }
  return br;
}

// Representatives of a best-response set under the ego-visible key.
std::vector<int> dedup_by_key(const GameInstance& g, int follower, const std::vector<int>& set) {
  std::vector<int> reps;
  std::vector<long long> seen;
  for (int cand : set) {
    const long long key = visible_key_of(g, follower, cand);
    if (std::find(seen.begin(), seen.end(), key) == seen.end()) {
      seen.push_back(key);
      reps.push_back(cand);
    }
  }
  return reps;
}

long count_infeasible(const GameInstance& g) {
  long n = 0;
  for (int p = 0; p < g.n_players; ++p) {
    const auto feas = feasible_or_default(g, p);
    for (char f : feas) {
      if (!f) ++n;
    }
  }
  return n;
}

}  // namespace

std::vector<Candidate> candidate_set(Stage stage, const ConstraintBounds& bounds, int levels_ax,
                                     int levels_delta) {
  if (levels_ax < 2 || levels_delta < 2) {
    throw std::invalid_argument("candidate grid needs at least 2 levels per continuous axis");
  }
  std::vector<Behavior> behaviors;
  if (stage == Stage::Entering) {
    behaviors = {{0, 0}, {-1, 0}, {+1, 0}};
  } else {
    behaviors = {{0, 0}, {0, -1}, {0, +1}};
  }
  const auto ax_values = grid_values(levels_ax, bounds.dax_max);
  const auto dd_values = grid_values(levels_delta, bounds.ddelta_max);

  std::vector<Candidate> out;
  out.reserve(behaviors.size() * ax_values.size() * dd_values.size());
  for (const auto& b : behaviors) {
    for (double da : ax_values) {
      for (double dd : dd_values) {
        out.push_back(Candidate{ControlDelta{da, dd}, b});
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), candidate_order);
  return out;
}

std::vector<Candidate> restrict_candidates(const std::vector<Candidate>& candidates,
                                           std::span<const Behavior> allowed) {
  std::vector<Candidate> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    if (std::find(allowed.begin(), allowed.end(), c.behavior) != allowed.end()) {
      out.push_back(c);
    }
  }
  return out;
}

double mpc_cost_from_payoffs(std::span<const double> per_step_payoff, const Candidate& candidate,
                             int nc, const MpcCostWeights& w) {
  double cost = 0.0;
  for (double p : per_step_payoff) {
    const double j = 1.0 / (p + w.epsilon);
    cost += w.q * j * j;
  }
  const double da = candidate.delta.d_ax;
  const double dd = candidate.delta.d_delta_f;
  const double a2 = static_cast<double>(candidate.behavior.alpha * candidate.behavior.alpha);
  const double b2 = static_cast<double>(candidate.behavior.beta * candidate.behavior.beta);
  cost += nc * (w.r_dax * da * da + w.r_ddelta * dd * dd + w.r_alpha * a2 + w.r_beta * b2);
  return cost;
}

GameOutcome solve_stackelberg(const GameInstance& g, ExecutionPolicy policy) {
  const auto t0 = std::chrono::steady_clock::now();
  GameOutcome out;
  out.chosen.assign(g.n_players, 0);
  out.pi.assign(g.n_players, 0.0);
  out.player_fallback.assign(g.n_players, 0);
  out.infeasible = count_infeasible(g);

  const int n_followers = g.n_players - 1;
  const auto ego_feas = feasible_or_default(g, 0);

  std::vector<int> ego_candidates;
  for (int e = 0; e < g.n_candidates[0]; ++e) {
    if (ego_feas[e]) ego_candidates.push_back(e);
  }
  bool ego_fallback = ego_candidates.empty();
  if (ego_fallback) {
    ego_candidates.push_back(g.fallback[0]);
  }

  std::vector<std::vector<char>> follower_feas(n_followers);
  for (int f = 0; f < n_followers; ++f) follower_feas[f] = feasible_or_default(g, f + 1);

  // Worst-case cost of each ego candidate over follower best-response products.
  const int n_eval = static_cast<int>(ego_candidates.size());
  std::vector<double> worst(n_eval, kInf);
  std::vector<long> evaluated(n_eval, 0);

  auto eval_candidate = [&](int idx) {
    const int e = ego_candidates[idx];
    std::vector<std::vector<int>> reps(n_followers);
    for (int f = 0; f < n_followers; ++f) {
      const BestResponse br = best_response(g, follower_feas[f], f, e);
      reps[f] = dedup_by_key(g, f, br.set);
      evaluated[idx] += static_cast<long>(g.n_candidates[f + 1]);
    }
    std::vector<int> choice(n_followers, 0);
    double w = -kInf;
    // Lexicographic walk over the best-response representatives.
    std::vector<size_t> pos(n_followers, 0);
    while (true) {
      for (int f = 0; f < n_followers; ++f) choice[f] = reps[f][pos[f]];
      w = std::max(w, g.ego_cost(e, choice));
      ++evaluated[idx];
      int f = n_followers - 1;
      while (f >= 0) {
        if (++pos[f] < reps[f].size()) break;
        pos[f] = 0;
        --f;
      }
      if (f < 0) break;
    }
    worst[idx] = w;
  };

  if (policy == ExecutionPolicy::Parallel) {
#ifdef CAVSIM_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n_eval; ++i) eval_candidate(i);
#else
    for (int i = 0; i < n_eval; ++i) eval_candidate(i);
#endif
  } else {
    for (int i = 0; i < n_eval; ++i) eval_candidate(i);
  }

  int best_idx = 0;
  for (int i = 1; i < n_eval; ++i) {
    if (worst[i] < worst[best_idx]) best_idx = i;
  }
  for (long v : evaluated) out.evaluated += v;

  const int e_star = ego_candidates[best_idx];
  out.chosen[0] = e_star;
  out.ego_fallback = ego_fallback;
  out.player_fallback[0] = ego_fallback ? 1 : 0;
  out.objective = worst[best_idx];

  std::vector<int> follower_choice(n_followers, 0);
  for (int f = 0; f < n_followers; ++f) {
    const BestResponse br = best_response(g, follower_feas[f], f, e_star);
    follower_choice[f] = br.set.front();
    out.chosen[f + 1] = br.set.front();
    out.player_fallback[f + 1] = br.fallback ? 1 : 0;
    out.pi[f + 1] = g.follower_cost[f][e_star][br.set.front()];
  }
  out.pi[0] = g.ego_cost(e_star, follower_choice);

  out.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

GameOutcome solve_grand_coalition(const GameInstance& g, ExecutionPolicy policy) {
  const auto t0 = std::chrono::steady_clock::now();
  GameOutcome out;
  out.chosen.assign(g.n_players, 0);
  out.pi.assign(g.n_players, 0.0);
  out.player_fallback.assign(g.n_players, 0);
  out.infeasible = count_infeasible(g);

  const int n_followers = g.n_players - 1;
  const auto omega = omega_or_equal(g);
  const auto ego_feas = feasible_or_default(g, 0);

  std::vector<std::vector<char>> follower_feas(n_followers);
  std::vector<char> follower_pinned(n_followers, 0);
  for (int f = 0; f < n_followers; ++f) {
    follower_feas[f] = feasible_or_default(g, f + 1);
    if (std::none_of(follower_feas[f].begin(), follower_feas[f].end(),
                     [](char c) { return c != 0; })) {
      follower_pinned[f] = 1;
      out.player_fallback[f + 1] = 1;
    }
  }

  std::vector<int> ego_candidates;
  for (int e = 0; e < g.n_candidates[0]; ++e) {
    if (ego_feas[e]) ego_candidates.push_back(e);
  }
  const bool ego_fallback = ego_candidates.empty();
  if (ego_fallback) ego_candidates.push_back(g.fallback[0]);
  out.ego_fallback = ego_fallback;
  out.player_fallback[0] = ego_fallback ? 1 : 0;

  const int n_eval = static_cast<int>(ego_candidates.size());
  std::vector<double> value(n_eval, kInf);
  std::vector<std::vector<int>> profile(n_eval);
  std::vector<long> evaluated(n_eval, 0);

  auto eval_candidate = [&](int idx) {
    const int e = ego_candidates[idx];
    std::vector<int> choice(n_followers, 0);
    // Without an explicit coupling list, treat every follower as coupled.
    std::vector<char> is_coupled(n_followers, g.coupled.empty() ? 1 : 0);
    if (e < static_cast<int>(g.coupled.size())) {
      for (int f : g.coupled[e]) is_coupled[f] = 1;
    }
    double base = 0.0;
    std::vector<int> coupled_free;
    for (int f = 0; f < n_followers; ++f) {
      if (follower_pinned[f]) {
        choice[f] = g.fallback[f + 1];
        base += omega[f + 1] * g.follower_cost[f][e][choice[f]];
        continue;
      }
      if (is_coupled[f]) {
        coupled_free.push_back(f);
        continue;
      }
      // Uncoupled follower: its term separates; keep its first minimizer.
      const auto& row = g.follower_cost[f][e];
      double best = kInf;
      int best_cf = g.fallback[f + 1];
      for (int cf = 0; cf < g.n_candidates[f + 1]; ++cf) {
        if (!follower_feas[f][cf]) continue;
        if (row[cf] < best) {
          best = row[cf];
          best_cf = cf;
        }
      }
      choice[f] = best_cf;
      base += omega[f + 1] * best;
      evaluated[idx] += static_cast<long>(g.n_candidates[f + 1]);
    }

    // Exhaustive product over the followers coupled to the ego cost.
    std::vector<int> best_choice = choice;
    double best_val = kInf;
    std::vector<size_t> pos(coupled_free.size(), 0);
    std::vector<std::vector<int>> lists(coupled_free.size());
    for (size_t i = 0; i < coupled_free.size(); ++i) {
      const int f = coupled_free[i];
      for (int cf = 0; cf < g.n_candidates[f + 1]; ++cf) {
        if (follower_feas[f][cf]) lists[i].push_back(cf);
      }
    }
    while (true) {
      double val = base;
      for (size_t i = 0; i < coupled_free.size(); ++i) {
        const int f = coupled_free[i];
        choice[f] = lists[i][pos[i]];
        val += omega[f + 1] * g.follower_cost[f][e][choice[f]];
      }
      val += omega[0] * g.ego_cost(e, choice);
      ++evaluated[idx];
      if (val < best_val) {
        best_val = val;
        best_choice = choice;
      }
      if (coupled_free.empty()) break;
      int i = static_cast<int>(coupled_free.size()) - 1;
      while (i >= 0) {
        if (++pos[i] < lists[i].size()) break;
        pos[i] = 0;
        --i;
      }
      if (i < 0) break;
    }
    value[idx] = best_val;
    profile[idx] = best_choice;
  };

  if (policy == ExecutionPolicy::Parallel) {
#ifdef CAVSIM_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n_eval; ++i) eval_candidate(i);
#else
    for (int i = 0; i < n_eval; ++i) eval_candidate(i);
#endif
  } else {
    for (int i = 0; i < n_eval; ++i) eval_candidate(i);
  }

  int best_idx = 0;
  for (int i = 1; i < n_eval; ++i) {
    if (value[i] < value[best_idx]) best_idx = i;
  }
  for (long v : evaluated) out.evaluated += v;

  const int e_star = ego_candidates[best_idx];
  out.chosen[0] = e_star;
  for (int f = 0; f < n_followers; ++f) {
    out.chosen[f + 1] = profile[best_idx][f];
    out.pi[f + 1] = g.follower_cost[f][e_star][profile[best_idx][f]];
  }
  out.pi[0] = g.ego_cost(e_star, profile[best_idx]);
  out.objective = value[best_idx];

  out.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace cavsim
