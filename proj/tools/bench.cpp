// Benchmark of the epoch solvers: serial loops against the OpenMP-parallel
// paths, on a synthetic instance and on a scenario epoch.

#include <chrono>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "cavsim/epoch.hpp"
#include "cavsim/game.hpp"
#include "cavsim/scenario.hpp"

using namespace cavsim;

namespace {

GameInstance synthetic_instance(int n_players, int n_candidates, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> cost(0.1, 10.0);

  GameInstance g;
  g.n_players = n_players;
  g.n_candidates.assign(n_players, n_candidates);
  g.feasible.assign(n_players, std::vector<char>(n_candidates, 1));
  g.fallback.assign(n_players, 0);
  const int nf = n_players - 1;
  g.follower_cost.resize(nf);
  for (int f = 0; f < nf; ++f) {
    g.follower_cost[f].resize(n_candidates);
    for (int e = 0; e < n_candidates; ++e) {
      g.follower_cost[f][e].resize(n_candidates);
      for (int c = 0; c < n_candidates; ++c) g.follower_cost[f][e][c] = cost(rng);
    }
  }
  auto table = std::make_shared<std::vector<double>>(n_candidates * (nf > 0 ? nf : 1) * 7);
  for (auto& v : *table) v = cost(rng);
  g.ego_cost = [table, nf, n_candidates](int e, const std::vector<int>& choices) {
    double v = (*table)[e % table->size()];
    for (int f = 0; f < nf; ++f) {
      v += (*table)[(e * 31 + choices[f] * 7 + f) % table->size()];
    }
    return v;
  };
  return g;
}

template <typename F>
double time_ms(F&& fn, int reps) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

}  // namespace

int main(int argc, char** argv) {
  const int reps = 20;
  const GameInstance g = synthetic_instance(4, 75, 17);

  const double sg_serial =
      time_ms([&] { solve_stackelberg(g, ExecutionPolicy::Serial); }, reps);
  const double sg_par =
      time_ms([&] { solve_stackelberg(g, ExecutionPolicy::Parallel); }, reps);
  const double gc_serial =
      time_ms([&] { solve_grand_coalition(g, ExecutionPolicy::Serial); }, reps);
  const double gc_par =
      time_ms([&] { solve_grand_coalition(g, ExecutionPolicy::Parallel); }, reps);

  std::printf("synthetic 4-player, 75 candidates/player (ms per solve)\n");
  std::printf("  stackelberg      serial %8.3f   parallel %8.3f   speedup %.2fx\n", sg_serial,
              sg_par, sg_serial / sg_par);
  std::printf("  grand coalition  serial %8.3f   parallel %8.3f   speedup %.2fx\n", gc_serial,
              gc_par, gc_serial / gc_par);

  if (argc > 1) {
    const ScenarioConfig cfg = load_scenario(argv[1]);
    const RoundaboutGeometry geo(cfg.geometry);
    const auto agents = instantiate_agents(cfg, geo);
    const EpochProblem problem = build_epoch(agents, 0, cfg, geo);
    const double build_ms = time_ms([&] { build_epoch(agents, 0, cfg, geo); }, reps);
    const double esg_s =
        time_ms([&] { solve_stackelberg(problem.instance(), ExecutionPolicy::Serial); }, reps);
    const double esg_p =
        time_ms([&] { solve_stackelberg(problem.instance(), ExecutionPolicy::Parallel); }, reps);
    const double egc_s = time_ms(
        [&] { solve_grand_coalition(problem.instance(), ExecutionPolicy::Serial); }, reps);
    const double egc_p = time_ms(
        [&] { solve_grand_coalition(problem.instance(), ExecutionPolicy::Parallel); }, reps);
    std::printf("\nscenario '%s', first epoch of agent %s (%d players)\n", cfg.name.c_str(),
                agents[0].id.c_str(), problem.instance().n_players);
    std::printf("  epoch build      %8.3f ms\n", build_ms);
    std::printf("  stackelberg      serial %8.3f   parallel %8.3f\n", esg_s, esg_p);
    std::printf("  grand coalition  serial %8.3f   parallel %8.3f\n", egc_s, egc_p);
  }
  return 0;
}
