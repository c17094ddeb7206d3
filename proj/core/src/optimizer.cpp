#include "cfc/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "cfc/errors.hpp"
#include "cfc/parallel.hpp"
#include "cfc/rng.hpp"

namespace cfc {
namespace {

using Levels = std::vector<std::uint8_t>;

struct Score {
  double cost = 0.0;
  double slack = 0.0;
  bool feasible = false;  // plain constraint
};

/// Replays strategies on the search seed, memoized by level vector.
class Oracle {
 public:
  Oracle(const ReplayEngine& engine, const CostConfig& cost, const SearchConfig& search)
      : engine_(engine), cost_(cost), search_(search) {}

  StrategyMatrix strategy(const Levels& levels) const {
    return StrategyMatrix::from_levels(engine_.num_links(), engine_.num_intervals(), search_.quantization_levels,
                                       levels);
  }

  bool cached(const Levels& levels) const {
    std::lock_guard lock(mutex_);
    return cache_.count(levels) > 0;
  }

  Score operator()(const Levels& levels) {
    {
      std::lock_guard lock(mutex_);
      if (auto it = cache_.find(levels); it != cache_.end()) return it->second;
    }
    EvaluationResult r = engine_.run(strategy(levels), search_.rng_seed, search_.monte_carlo_runs);
    const Feasibility f = check_feasibility(r, cost_);
    const Score s{total_cost(r.features, engine_.durations(), cost_), f.slack, f.feasible};
    std::lock_guard lock(mutex_);
    cache_.emplace(levels, s);
    return s;
  }

  bool accepts(const Score& s) const { return s.slack >= search_.margin; }

  int calls() const {
    std::lock_guard lock(mutex_);
    return static_cast<int>(cache_.size());
  }

 private:
  const ReplayEngine& engine_;
  const CostConfig& cost_;
  const SearchConfig& search_;
  mutable std::mutex mutex_;
  std::map<Levels, Score> cache_;
};

std::uint64_t hash_levels(const Levels& levels) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (auto v : levels) h = splitmix64(h ^ v);
  return h;
}

std::vector<std::size_t> candidate_order(int links, int intervals) {
  // (l, t, param) lexicographic, matching the tie-break rule.
  std::vector<std::size_t> order;
  const std::size_t per_param = static_cast<std::size_t>(links) * intervals;
  for (LinkId l = 0; l < links; ++l) {
    for (int t = 0; t < intervals; ++t) {
      for (int p = 0; p < 2; ++p) order.push_back(p * per_param + static_cast<std::size_t>(l) * intervals + t);
    }
  }
  return order;
}

void log_entry(OptimizeResult& out, int step, const Levels& levels, const Score& s, bool feasible, bool accepted) {
  out.log.push_back({step, hash_levels(levels), s.cost, feasible, accepted});
}

std::vector<Levels> greedy(Oracle& oracle, const Levels& start, int links, int intervals, const SearchConfig& search,
                           OptimizeResult& out) {
  std::vector<Levels> chain{start};
  Levels current = start;
  double current_cost = oracle(current).cost;
  const auto order = candidate_order(links, intervals);
  std::vector<char> frozen(current.size(), 0);

  for (int step = 1;; ++step) {
    std::vector<std::size_t> cands;
    for (std::size_t pos : order) {
      if (current[pos] > 0 && !frozen[pos]) cands.push_back(pos);
    }
    if (cands.empty()) break;
    std::vector<Levels> states(cands.size(), current);
    int fresh = 0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      --states[i][cands[i]];
      if (!oracle.cached(states[i])) ++fresh;
    }
    if (oracle.calls() + fresh > search.max_oracle_calls) break;

    std::vector<Score> scores(cands.size());
    parallel_for(cands.size(), search.jobs, [&](std::size_t i) { scores[i] = oracle(states[i]); });

    std::size_t best = cands.size();
    double best_gain = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cands.size(); ++i) {
      const bool ok = oracle.accepts(scores[i]);
      if (!ok) {
        if (search.prune_infeasible) frozen[cands[i]] = 1;
        continue;
      }
      const double gain = current_cost - scores[i].cost;
      if (gain >= 0.0 && gain > best_gain) {
        best_gain = gain;
        best = i;
      }
    }
    for (std::size_t i = 0; i < cands.size(); ++i) {
      log_entry(out, step, states[i], scores[i], oracle.accepts(scores[i]), i == best);
    }
    if (best == cands.size()) break;
    current = states[best];
    current_cost = scores[best].cost;
    chain.push_back(current);
    ++out.steps;
  }
  return chain;
}

std::vector<Levels> anneal(Oracle& oracle, const Levels& start, double all_on_cost, const SearchConfig& search,
                           OptimizeResult& out) {
  Rng rng(derive_seed(search.rng_seed, 0x414e4e45));
  const int max_level = search.quantization_levels - 1;
  std::vector<Levels> improvements{start};
  Levels current = start;
  double current_cost = oracle(current).cost;
  double best_cost = current_cost;
  double temp = search.anneal.initial_temp * std::max(all_on_cost, 1e-300);
  // Proposals are bounded too, so the walk ends once the cache saturates.
  const long max_proposals = 50L * search.max_oracle_calls;

  long proposals = 0;
  for (int step = 1; oracle.calls() < search.max_oracle_calls && proposals < max_proposals; ++step) {
    for (int m = 0; m < search.anneal.moves_per_temp && oracle.calls() < search.max_oracle_calls; ++m, ++proposals) {
      Levels next = current;
      const std::size_t pos = rng.below(next.size());
      const bool up = rng.bernoulli(0.5);
      if (up ? next[pos] >= max_level : next[pos] == 0) continue;
      next[pos] = static_cast<std::uint8_t>(next[pos] + (up ? 1 : -1));
      const Score s = oracle(next);
      const bool ok = oracle.accepts(s);
      bool accepted = false;
      if (ok) {
        const double delta = s.cost - current_cost;
        accepted = delta <= 0.0 || (temp > 0.0 && rng.uniform() < std::exp(-delta / temp));
      }
      log_entry(out, step, next, s, ok, accepted);
      if (!accepted) continue;
      current = std::move(next);
      current_cost = s.cost;
      ++out.steps;
      if (current_cost < best_cost) {
        best_cost = current_cost;
        improvements.push_back(current);
      }
    }
    temp *= search.anneal.cooling_rate;
  }
  return improvements;
}

// Walks the accepted chain backwards until a state passes the constraint on
// a fresh seed with more runs.
void revalidate(const ReplayEngine& engine, const CostConfig& cost, const SearchConfig& search, Oracle& oracle,
                const std::vector<Levels>& chain, OptimizeResult& out) {
  const std::uint64_t seed = derive_seed(search.rng_seed, 0x52455641);
  const int runs = search.monte_carlo_runs * search.revalidation_factor;
  for (std::size_t i = chain.size(); i-- > 0;) {
    StrategyMatrix s = oracle.strategy(chain[i]);
    EvaluationResult r = engine.run(s, seed, runs);
    score(r, engine.durations(), cost);
    if (check_feasibility(r, cost).slack >= search.revalidation_margin || i == 0) {
      out.strategy = std::move(s);
      out.evaluation = std::move(r);
      out.search_cost = oracle(chain[i]).cost;
      return;
    }
    ++out.backtracks;
  }
}

}  // namespace

void SearchConfig::validate() const {
  if (max_oracle_calls < 1) throw std::invalid_argument("max_oracle_calls must be >= 1");
  if (!(anneal.cooling_rate > 0.0 && anneal.cooling_rate < 1.0)) {
    throw std::invalid_argument("cooling_rate must be in (0, 1)");
  }
  if (!(anneal.initial_temp >= 0.0)) throw std::invalid_argument("initial_temp must be >= 0");
  if (anneal.moves_per_temp < 1) throw std::invalid_argument("moves_per_temp must be >= 1");
  if (monte_carlo_runs < 1) throw std::invalid_argument("monte_carlo_runs must be >= 1");
  if (quantization_levels < 2 || quantization_levels > 256) {
    throw std::invalid_argument("quantization_levels must be in [2, 256]");
  }
  if (!(margin >= 0.0)) throw std::invalid_argument("margin must be >= 0");
  if (revalidation_factor < 1) throw std::invalid_argument("revalidation_factor must be >= 1");
  if (!(revalidation_margin >= 0.0)) throw std::invalid_argument("revalidation_margin must be >= 0");
}

nlohmann::json to_json(const SearchConfig& cfg) {
  return {{"method", cfg.method == SearchMethod::GreedyDeactivation ? "greedy" : "anneal"},
          {"max_oracle_calls", cfg.max_oracle_calls},
          {"anneal",
           {{"initial_temp", cfg.anneal.initial_temp},
            {"cooling_rate", cfg.anneal.cooling_rate},
            {"moves_per_temp", cfg.anneal.moves_per_temp}}},
          {"monte_carlo_runs", cfg.monte_carlo_runs},
          {"rng_seed", cfg.rng_seed},
          {"quantization_levels", cfg.quantization_levels},
          {"margin", cfg.margin},
          {"revalidation_factor", cfg.revalidation_factor},
          {"revalidation_margin", cfg.revalidation_margin},
          {"prune_infeasible", cfg.prune_infeasible}};
}

SearchConfig search_config_from_json(const nlohmann::json& doc) {
  SearchConfig cfg;
  try {
    const std::string method = doc.value("method", std::string("greedy"));
    if (method == "greedy") {
      cfg.method = SearchMethod::GreedyDeactivation;
    } else if (method == "anneal") {
      cfg.method = SearchMethod::SimulatedAnnealing;
    } else {
      throw std::invalid_argument("unknown search method '" + method + "' (expected greedy or anneal)");
    }
    cfg.max_oracle_calls = doc.value("max_oracle_calls", cfg.max_oracle_calls);
    if (doc.contains("anneal")) {
      const auto& a = doc.at("anneal");
      cfg.anneal.initial_temp = a.value("initial_temp", cfg.anneal.initial_temp);
      cfg.anneal.cooling_rate = a.value("cooling_rate", cfg.anneal.cooling_rate);
      cfg.anneal.moves_per_temp = a.value("moves_per_temp", cfg.anneal.moves_per_temp);
    }
    cfg.monte_carlo_runs = doc.value("monte_carlo_runs", cfg.monte_carlo_runs);
    cfg.rng_seed = doc.value("rng_seed", cfg.rng_seed);
    cfg.quantization_levels = doc.value("quantization_levels", cfg.quantization_levels);
    cfg.margin = doc.value("margin", cfg.margin);
    cfg.revalidation_factor = doc.value("revalidation_factor", cfg.revalidation_factor);
    cfg.revalidation_margin = doc.value("revalidation_margin", cfg.revalidation_margin);
    cfg.prune_infeasible = doc.value("prune_infeasible", cfg.prune_infeasible);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed search config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

double OptimizeResult::savings() const { return all_on_cost > 0.0 ? 1.0 - search_cost / all_on_cost : 0.0; }

OptimizeResult optimize(const ReplayEngine& engine, const CostConfig& cost, const SearchConfig& search) {
  cost.validate();
  search.validate();
  OptimizeResult out;
  out.method = search.method;
  const int L = engine.num_links(), T = engine.num_intervals(), q = search.quantization_levels;

  if (!engine.zoi_populated()) {
    out.empty_zoi = true;
    out.strategy = all_off(L, T, q);
    out.evaluation = engine.run(out.strategy, derive_seed(search.rng_seed, 0x52455641),
                                search.monte_carlo_runs * search.revalidation_factor);
    score(out.evaluation, engine.durations(), cost);
    out.search_cost = out.evaluation.cost;
    return out;
  }

  Oracle oracle(engine, cost, search);
  const Levels start = all_on(L, T, AllOnVariant::MaxRetention, q).levels();
  const Score base = oracle(start);
  out.all_on_cost = base.cost;
  log_entry(out, 0, start, base, oracle.accepts(base), true);
  if (!base.feasible) {
    throw NoFeasibleSolution("all-on misses the success-ratio target (min alpha - target = " +
                             std::to_string(base.slack) + ")");
  }

  const std::vector<Levels> chain = search.method == SearchMethod::GreedyDeactivation
                                        ? greedy(oracle, start, L, T, search, out)
                                        : anneal(oracle, start, base.cost, search, out);
  revalidate(engine, cost, search, oracle, chain, out);
  out.oracle_calls = oracle.calls();
  return out;
}

OptimizeResult optimize(const ContactTrace& trace, const RoadGrid& grid, const ReplayConfig& replay,
                        const CostConfig& cost, const SearchConfig& search) {
  return optimize(ReplayEngine(trace, grid, replay), cost, search);
}

void write_run_log(std::ostream& out, const OptimizeResult& result) {
  for (const auto& e : result.log) {
    out << nlohmann::json{{"step", e.step},
                          {"candidate", e.candidate},
                          {"cost", e.cost},
                          {"feasible", e.feasible},
                          {"accepted", e.accepted}}
                .dump()
        << '\n';
  }
}

nlohmann::json to_json(const OptimizeResult& result, const CostConfig& cost) {
  return {{"method", result.method == SearchMethod::GreedyDeactivation ? "greedy" : "anneal"},
          {"strategy", to_json(result.strategy)},
          {"report", cost_report(result.evaluation, cost, result.all_on_cost)},
          {"search_cost", result.search_cost},
          {"all_on_cost", result.all_on_cost},
          {"savings", result.savings()},
          {"oracle_calls", result.oracle_calls},
          {"steps", result.steps},
          {"backtracks", result.backtracks},
          {"empty_zoi", result.empty_zoi}};
}

std::uint64_t exhaustive_space_size(int num_links, int num_intervals) {
  const int dims = 2 * num_links * num_intervals;
  std::uint64_t n = 1;
  for (int i = 0; i < dims; ++i) {
    if (n > std::numeric_limits<std::uint64_t>::max() / 3) return std::numeric_limits<std::uint64_t>::max();
    n *= 3;
  }
  return n;
}

OptimizeResult exhaustive_solve(const ReplayEngine& engine, const CostConfig& cost, const SearchConfig& search,
                                const ExhaustiveLimits& limits) {
  cost.validate();
  search.validate();
  const int L = engine.num_links(), T = engine.num_intervals(), q = search.quantization_levels;
  const std::uint64_t space = exhaustive_space_size(L, T);
  if (L > limits.max_links || T > limits.max_intervals || space > limits.max_evaluations) {
    throw SearchSpaceTooLarge(std::to_string(L) + " links x " + std::to_string(T) + " intervals gives " +
                              std::to_string(space) + " strategies, over the enumeration limit");
  }
  if ((q - 1) % 2 != 0) throw std::invalid_argument("exhaustive search needs a lattice containing 0.5");
  const std::uint8_t half = static_cast<std::uint8_t>((q - 1) / 2);
  const std::uint8_t coarse[3] = {0, half, static_cast<std::uint8_t>(q - 1)};

  Oracle oracle(engine, cost, search);
  OptimizeResult out;
  out.all_on_cost = oracle(all_on(L, T, AllOnVariant::MaxRetention, q).levels()).cost;
  const std::size_t dims = static_cast<std::size_t>(2 * L * T);
  std::vector<Score> scores(space);
  std::vector<Levels> states(space);
  for (std::uint64_t code = 0; code < space; ++code) {
    Levels lv(dims);
    std::uint64_t c = code;
    for (std::size_t d = 0; d < dims; ++d, c /= 3) lv[d] = coarse[c % 3];
    states[code] = std::move(lv);
  }
  parallel_for(space, search.jobs, [&](std::size_t i) { scores[i] = oracle(states[i]); });

  std::size_t best = space;
  for (std::size_t i = 0; i < space; ++i) {
    if (oracle.accepts(scores[i]) && (best == space || scores[i].cost < scores[best].cost)) best = i;
  }
  if (best == space) throw NoFeasibleSolution("no strategy on the coarse lattice meets the target with the margin");
  out.strategy = oracle.strategy(states[best]);
  out.search_cost = scores[best].cost;
  out.evaluation = engine.run(out.strategy, search.rng_seed, search.monte_carlo_runs);
  score(out.evaluation, engine.durations(), cost);
  out.oracle_calls = oracle.calls();
  return out;
}

}  // namespace cfc
