#pragma once

#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cfc/replay.hpp"
#include "cfc/strategy.hpp"

namespace cfc {

struct CostConfig {
  double content_size = 3.2e7;  // D, bits
  double beta = 1.0;            // weight of concurrent transmissions
  double alpha_target = 0.9;

  void validate() const;
};

/// Duration-weighted average over intervals of
/// sum_l (D * holders + beta * nodes in transfer).
double total_cost(const LinkFeatures& features, std::span<const double> durations, const CostConfig& cfg);

/// Memory and transmission parts of total_cost; they add up to it.
struct CostBreakdown {
  double memory = 0.0;
  double transmission = 0.0;
  double total() const { return memory + transmission; }
};
CostBreakdown cost_breakdown(const LinkFeatures& features, std::span<const double> durations, const CostConfig& cfg);

struct Feasibility {
  bool feasible = false;
  bool all_undefined = false;  // no interval had a populated ZOI: vacuously feasible
  std::vector<int> undefined_intervals;
  /// min over defined intervals of alpha_t - alpha_target; +inf when none is defined.
  double slack = 0.0;
};

Feasibility check_feasibility(const EvaluationResult& result, const CostConfig& cfg);
/// True iff every defined alpha_t >= alpha_target.
bool is_feasible(const EvaluationResult& result, const CostConfig& cfg);

/// Fills result.cost and result.feasible.
void score(EvaluationResult& result, std::span<const double> durations, const CostConfig& cfg);

enum class AllOnVariant {
  MaxRetention,  // a = 1, b = 1
  Literal,       // a = 1, b = 0
};

StrategyMatrix all_on(int num_links, int num_intervals, AllOnVariant variant = AllOnVariant::MaxRetention,
                      int quantization_levels = kDefaultQuantization);
StrategyMatrix all_off(int num_links, int num_intervals, int quantization_levels = kDefaultQuantization);

/// 1 - candidate/all_on. Throws UndefinedSavings when all_on_cost <= 0.
double resource_savings(double candidate_cost, double all_on_cost);

/// {cost, savings_vs_all_on, alpha, feasible, undefined_intervals}; savings
/// is null when all_on_cost is absent or zero.
nlohmann::json cost_report(const EvaluationResult& result, const CostConfig& cfg,
                           std::optional<double> all_on_cost = std::nullopt);

nlohmann::json to_json(const CostConfig& cfg);
CostConfig cost_config_from_json(const nlohmann::json& doc);

}  // namespace cfc
