#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cfc/cost_model.hpp"
#include "cfc/replay.hpp"
#include "cfc/strategy.hpp"

namespace cfc {

enum class SearchMethod { GreedyDeactivation, SimulatedAnnealing };

struct AnnealSchedule {
  double initial_temp = 0.05;  // as a fraction of the all-on cost
  double cooling_rate = 0.9;
  int moves_per_temp = 25;
};

struct SearchConfig {
  SearchMethod method = SearchMethod::GreedyDeactivation;
  int max_oracle_calls = 20000;
  AnnealSchedule anneal;
  int monte_carlo_runs = 8;
  std::uint64_t rng_seed = 1;
  int quantization_levels = kDefaultQuantization;
  /// A state is accepted only when min_t alpha_t - alpha_target >= margin.
  double margin = 0.01;
  /// The returned strategy is re-checked on a fresh seed with this many
  /// times the search runs.
  int revalidation_factor = 4;
  /// Slack the returned strategy must keep on the revalidation replay.
  double revalidation_margin = 0.005;
  /// Greedy: an entry whose decrement broke feasibility is not tried again.
  bool prune_infeasible = true;
  int jobs = 1;

  void validate() const;
};

nlohmann::json to_json(const SearchConfig& cfg);
SearchConfig search_config_from_json(const nlohmann::json& doc);

struct OracleLogEntry {
  int step = 0;
  std::uint64_t candidate = 0;  // strategy hash
  double cost = 0.0;
  bool feasible = false;  // with the search margin
  bool accepted = false;
};

struct OptimizeResult {
  SearchMethod method = SearchMethod::GreedyDeactivation;
  StrategyMatrix strategy;
  /// Replay of `strategy` on the revalidation seed, scored.
  EvaluationResult evaluation;
  double search_cost = 0.0;   // cost of `strategy` on the search seed
  double all_on_cost = 0.0;   // on the search seed
  int oracle_calls = 0;       // distinct replays
  int steps = 0;              // accepted moves
  int backtracks = 0;         // states discarded by revalidation
  bool empty_zoi = false;
  std::vector<OracleLogEntry> log;

  /// search_cost relative to all_on_cost; 0 when the latter is 0.
  double savings() const;
};

/// Minimum-cost search starting from all-on. Throws NoFeasibleSolution when
/// all-on misses the target on the search seed. A ZOI nobody visits yields
/// the all-off strategy.
OptimizeResult optimize(const ReplayEngine& engine, const CostConfig& cost, const SearchConfig& search);
OptimizeResult optimize(const ContactTrace& trace, const RoadGrid& grid, const ReplayConfig& replay,
                        const CostConfig& cost, const SearchConfig& search);

void write_run_log(std::ostream& out, const OptimizeResult& result);
nlohmann::json to_json(const OptimizeResult& result, const CostConfig& cost);

struct ExhaustiveLimits {
  int max_links = 3;
  int max_intervals = 2;
  std::uint64_t max_evaluations = 10'000'000;
};

/// Number of strategies on the {0, 0.5, 1} lattice.
std::uint64_t exhaustive_space_size(int num_links, int num_intervals);

/// Cheapest strategy on the {0, 0.5, 1} lattice that satisfies the target
/// with the search margin, by enumeration. Throws SearchSpaceTooLarge past
/// the limits and NoFeasibleSolution when nothing qualifies.
OptimizeResult exhaustive_solve(const ReplayEngine& engine, const CostConfig& cost, const SearchConfig& search,
                                const ExhaustiveLimits& limits = {});

}  // namespace cfc
