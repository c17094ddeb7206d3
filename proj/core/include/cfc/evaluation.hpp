#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cfc/baselines.hpp"
#include "cfc/dataset.hpp"

namespace cfc {

struct LevelPrediction {
  std::vector<std::uint8_t> a_levels;
  std::vector<std::uint8_t> b_levels;
};

using Predictions = std::map<std::int64_t, LevelPrediction>;  // by record id

Predictions predict_records(const MultiLabelModel& model, const Dataset& dataset,
                            const std::vector<std::size_t>& rows, int jobs = 1);

struct CaseOutcome {
  int trace = 0;
  bool feasible = false;
  double cost = 0.0;
  double all_on_cost = 0.0;
};

struct EvaluationReport {
  std::size_t records = 0;
  double f_micro = 1.0;
  double f_macro = 1.0;
  ScoreInterval f_micro_interval;  // 98% percentile bootstrap over records
  std::vector<CaseOutcome> cases;  // one per test trace
  double rejection_probability = 0.0;
  /// Mean savings over accepted cases, and over all cases when rejected
  /// ones fall back to all-on. Cases with zero all-on cost are skipped.
  double savings_accepted = 0.0;
  double savings_with_fallback = 0.0;
};

struct EvaluationOptions {
  std::uint64_t seed = 1;
  int monte_carlo_runs = 0;  // 0: as recorded in the dataset
  int jobs = 1;
};

/// Scores predictions against the stored labels and, for every trace the
/// predicted records belong to, replays the predicted strategy (interval t
/// taken from the lowest-id predicted record of that interval; intervals
/// without one stay all-off) and checks the success-ratio target.
EvaluationReport evaluate_predictions(const Dataset& dataset, const std::vector<ContactTrace>& traces,
                                      const Predictions& predictions, const EvaluationOptions& options = {});

/// Fraction of cases whose strategy misses the target on its trace.
double rejection_probability(const EvaluationReport& report);

nlohmann::json to_json(const EvaluationReport& report);

}  // namespace cfc
