#include "cfc/cost_model.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "cfc/errors.hpp"

namespace cfc {
namespace {

// Rounding slack when comparing a Monte Carlo ratio against the target.
constexpr double kAlphaTol = 1e-12;

}  // namespace

void CostConfig::validate() const {
  if (!(content_size > 0.0)) throw std::invalid_argument("content_size must be > 0");
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
  if (!(alpha_target >= 0.0 && alpha_target <= 1.0)) throw std::invalid_argument("alpha_target must be in [0, 1]");
}

CostBreakdown cost_breakdown(const LinkFeatures& features, std::span<const double> durations, const CostConfig& cfg) {
  if (static_cast<int>(durations.size()) != features.num_intervals()) {
    throw std::invalid_argument("features have " + std::to_string(features.num_intervals()) + " intervals, got " +
                                std::to_string(durations.size()) + " durations");
  }
  const double total_time = std::accumulate(durations.begin(), durations.end(), 0.0);
  if (!(total_time > 0.0)) throw std::invalid_argument("interval durations must sum to > 0");
  CostBreakdown out;
  for (int t = 0; t < features.num_intervals(); ++t) {
    double holders = 0.0, transferring = 0.0;
    for (LinkId l = 0; l < features.num_links(); ++l) {
      holders += features.at(Feature::MeanContentHolders, l, t);
      transferring += features.at(Feature::MeanConcurrentTransmissions, l, t);
    }
    out.memory += cfg.content_size * holders * durations[t];
    out.transmission += cfg.beta * transferring * durations[t];
  }
  out.memory /= total_time;
  out.transmission /= total_time;
  return out;
}

double total_cost(const LinkFeatures& features, std::span<const double> durations, const CostConfig& cfg) {
  return cost_breakdown(features, durations, cfg).total();
}

Feasibility check_feasibility(const EvaluationResult& result, const CostConfig& cfg) {
  Feasibility f;
  f.slack = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < result.success_ratios.size(); ++t) {
    const auto& alpha = result.success_ratios[t];
    if (!alpha) {
      f.undefined_intervals.push_back(static_cast<int>(t));
      continue;
    }
    f.slack = std::min(f.slack, *alpha - cfg.alpha_target);
  }
  f.all_undefined = f.undefined_intervals.size() == result.success_ratios.size();
  f.feasible = f.slack >= -kAlphaTol;
  return f;
}

bool is_feasible(const EvaluationResult& result, const CostConfig& cfg) {
  return check_feasibility(result, cfg).feasible;
}

void score(EvaluationResult& result, std::span<const double> durations, const CostConfig& cfg) {
  result.cost = total_cost(result.features, durations, cfg);
  result.feasible = is_feasible(result, cfg);
}

StrategyMatrix all_on(int num_links, int num_intervals, AllOnVariant variant, int quantization_levels) {
  if (num_links < 1 || num_intervals < 1) throw std::invalid_argument("all_on needs positive dimensions");
  return StrategyMatrix::filled(num_links, num_intervals, 1.0, variant == AllOnVariant::MaxRetention ? 1.0 : 0.0,
                                quantization_levels);
}

StrategyMatrix all_off(int num_links, int num_intervals, int quantization_levels) {
  return StrategyMatrix(num_links, num_intervals, quantization_levels);
}

double resource_savings(double candidate_cost, double all_on_cost) {
  if (!(all_on_cost > 0.0)) throw UndefinedSavings("savings are undefined when the all-on cost is zero");
  return 1.0 - candidate_cost / all_on_cost;
}

nlohmann::json cost_report(const EvaluationResult& result, const CostConfig& cfg, std::optional<double> all_on_cost) {
  const Feasibility f = check_feasibility(result, cfg);
  nlohmann::json alpha = nlohmann::json::array();
  for (const auto& a : result.success_ratios) alpha.push_back(a ? nlohmann::json(*a) : nlohmann::json(nullptr));
  nlohmann::json savings = nullptr;
  if (all_on_cost && *all_on_cost > 0.0) savings = resource_savings(result.cost, *all_on_cost);
  nlohmann::json report = {{"cost", result.cost},
                           {"savings_vs_all_on", savings},
                           {"alpha", std::move(alpha)},
                           {"feasible", f.feasible},
                           {"undefined_intervals", f.undefined_intervals}};
  if (f.all_undefined) report["warning"] = "ZOI never populated; constraint holds vacuously";
  return report;
}

nlohmann::json to_json(const CostConfig& cfg) {
  return {{"content_size", cfg.content_size}, {"beta", cfg.beta}, {"alpha_target", cfg.alpha_target}};
}

CostConfig cost_config_from_json(const nlohmann::json& doc) {
  CostConfig cfg;
  try {
    cfg.content_size = doc.value("content_size", cfg.content_size);
    cfg.beta = doc.value("beta", cfg.beta);
    cfg.alpha_target = doc.value("alpha_target", cfg.alpha_target);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed cost config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace cfc
