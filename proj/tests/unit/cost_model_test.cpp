#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "cfc/cost_model.hpp"
#include "cfc/errors.hpp"

namespace cfc {
namespace {

// Two links, intervals of 10 s and 30 s.
LinkFeatures two_by_two() {
  LinkFeatures f(2, 2);
  f.at(Feature::MeanContentHolders, 0, 0) = 1.5;
  f.at(Feature::MeanContentHolders, 1, 0) = 0.5;
  f.at(Feature::MeanConcurrentTransmissions, 0, 0) = 1.0;
  f.at(Feature::MeanContentHolders, 0, 1) = 12.0;
  f.at(Feature::MeanContentHolders, 1, 1) = 8.0;
  f.at(Feature::MeanConcurrentTransmissions, 1, 1) = 1.0;
  return f;
}

const std::vector<double> kDurations = {10.0, 30.0};

EvaluationResult with_alpha(std::vector<std::optional<double>> alpha) {
  EvaluationResult r;
  r.success_ratios = std::move(alpha);
  return r;
}

TEST(CostModel, WorkedExample) {
  // (10 * (2 + 1) + 30 * (20 + 1)) / 40
  CostConfig cfg;
  cfg.content_size = 1.0;
  EXPECT_DOUBLE_EQ(total_cost(two_by_two(), kDurations, cfg), 16.5);
  const CostBreakdown parts = cost_breakdown(two_by_two(), kDurations, cfg);
  EXPECT_DOUBLE_EQ(parts.memory, 15.5);
  EXPECT_DOUBLE_EQ(parts.transmission, 1.0);
}

TEST(CostModel, BetaZeroKeepsMemoryOnly) {
  CostConfig cfg;
  cfg.beta = 0.0;
  EXPECT_DOUBLE_EQ(total_cost(two_by_two(), kDurations, cfg), 3.2e7 * 15.5);
}

TEST(CostModel, LinearInContentSizeAndBeta) {
  CostConfig c1, c2;
  c1.content_size = 2.0;
  c1.beta = 3.0;
  c2.content_size = 4.0;
  c2.beta = 6.0;
  EXPECT_DOUBLE_EQ(total_cost(two_by_two(), kDurations, c2), 2.0 * total_cost(two_by_two(), kDurations, c1));
}

TEST(CostModel, NormalizedByTotalTime) {
  // Scaling every duration leaves the cost unchanged.
  const std::vector<double> scaled = {100.0, 300.0};
  const CostConfig cfg;
  EXPECT_DOUBLE_EQ(total_cost(two_by_two(), scaled, cfg), total_cost(two_by_two(), kDurations, cfg));
  EXPECT_THROW(total_cost(two_by_two(), std::vector<double>{10.0}, cfg), std::invalid_argument);
}

TEST(CostModel, ThresholdIsInclusive) {
  const CostConfig cfg;
  EXPECT_FALSE(is_feasible(with_alpha({0.89}), cfg));
  EXPECT_TRUE(is_feasible(with_alpha({0.90}), cfg));
  EXPECT_TRUE(is_feasible(with_alpha({0.91}), cfg));
  EXPECT_FALSE(is_feasible(with_alpha({0.95, 0.89}), cfg));
  // Ratios computed from features land on the same side.
  LinkFeatures f(1, 3);
  for (int t = 0; t < 3; ++t) f.at(Feature::MeanNodeCount, 0, t) = 100.0;
  f.at(Feature::MeanContentHolders, 0, 0) = 89.0;
  f.at(Feature::MeanContentHolders, 0, 1) = 90.0;
  f.at(Feature::MeanContentHolders, 0, 2) = 91.0;
  for (int t = 0; t < 3; ++t) {
    EXPECT_EQ(is_feasible(with_alpha({success_ratio(f, {0}, t)}), cfg), t > 0) << t;
  }
}

TEST(CostModel, UndefinedIntervalsAreSkipped) {
  const CostConfig cfg;
  const Feasibility some = check_feasibility(with_alpha({std::nullopt, 0.95}), cfg);
  EXPECT_TRUE(some.feasible);
  EXPECT_FALSE(some.all_undefined);
  EXPECT_EQ(some.undefined_intervals, std::vector<int>{0});
  EXPECT_NEAR(some.slack, 0.05, 1e-12);
  const Feasibility none = check_feasibility(with_alpha({std::nullopt, std::nullopt}), cfg);
  EXPECT_TRUE(none.feasible);
  EXPECT_TRUE(none.all_undefined);
  const nlohmann::json report = cost_report(with_alpha({std::nullopt}), cfg);
  EXPECT_TRUE(report.contains("warning"));
  EXPECT_TRUE(report["savings_vs_all_on"].is_null());
  EXPECT_TRUE(report["alpha"][0].is_null());
}

TEST(CostModel, Savings) {
  EXPECT_DOUBLE_EQ(resource_savings(62.5, 100.0), 0.375);
  EXPECT_DOUBLE_EQ(resource_savings(100.0, 100.0), 0.0);
  EXPECT_DOUBLE_EQ(resource_savings(0.0, 8.0), 1.0);
  EXPECT_THROW(resource_savings(1.0, 0.0), UndefinedSavings);
  EvaluationResult r = with_alpha({0.93});
  r.cost = 30.0;
  const nlohmann::json report = cost_report(r, CostConfig{}, 40.0);
  EXPECT_DOUBLE_EQ(report["savings_vs_all_on"].get<double>(), 0.25);
  EXPECT_TRUE(report["feasible"].get<bool>());
  EXPECT_FALSE(report.contains("warning"));
}

TEST(CostModel, BenchmarkStrategies) {
  const StrategyMatrix on = all_on(3, 2);
  const StrategyMatrix lit = all_on(3, 2, AllOnVariant::Literal);
  for (int l = 0; l < 3; ++l) {
    for (int t = 0; t < 2; ++t) {
      EXPECT_EQ(on.a(l, t), 1.0);
      EXPECT_EQ(on.b(l, t), 1.0);
      EXPECT_EQ(lit.b(l, t), 0.0);
    }
  }
  EXPECT_TRUE(all_off(3, 2).all_zero());
}

TEST(CostModel, ConfigValidation) {
  EXPECT_THROW(cost_config_from_json({{"alpha_target", 1.5}}), std::invalid_argument);
  EXPECT_THROW(cost_config_from_json({{"beta", -1}}), std::invalid_argument);
  EXPECT_THROW(cost_config_from_json({{"beta", "x"}}), FormatError);
  CostConfig c;
  c.beta = 2.5;
  EXPECT_EQ(to_json(cost_config_from_json(to_json(c))), to_json(c));
}

}  // namespace
}  // namespace cfc
