#include "cfc/evaluation.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "cfc/errors.hpp"
#include "cfc/parallel.hpp"

namespace cfc {

Predictions predict_records(const MultiLabelModel& model, const Dataset& dataset,
                            const std::vector<std::size_t>& rows, int jobs) {
  std::vector<std::vector<double>> xs;
  xs.reserve(rows.size());
  for (auto i : rows) xs.push_back(mobility_inputs(dataset.records.at(i)));
  const auto ys = model.predict(xs, jobs);
  Predictions out;
  for (std::size_t j = 0; j < rows.size(); ++j) {
    LevelPrediction p;
    for (std::size_t s = 0; s + 1 < ys[j].size(); s += 2) {
      p.a_levels.push_back(ys[j][s]);
      p.b_levels.push_back(ys[j][s + 1]);
    }
    out[dataset.records[rows[j]].id] = std::move(p);
  }
  return out;
}

EvaluationReport evaluate_predictions(const Dataset& dataset, const std::vector<ContactTrace>& traces,
                                      const Predictions& predictions, const EvaluationOptions& options) {
  const DatasetHeader& h = dataset.header;
  if (h.grid.is_null() || h.replay.is_null()) throw FormatError("dataset header lacks grid or replay settings");
  if (traces.size() != h.traces.size()) throw std::invalid_argument("evaluation needs every trace of the dataset");
  const RoadGrid grid = grid_from_json(h.grid);
  const ReplayConfig replay = replay_config_from_json(h.replay.at("replay"));
  const CostConfig cost = cost_config_from_json(h.replay.at("cost"));
  const int runs = options.monte_carlo_runs > 0 ? options.monte_carlo_runs : replay.monte_carlo_runs;
  const auto L = static_cast<std::size_t>(h.num_links);

  std::map<std::int64_t, const DatasetRecord*> by_id;
  for (const auto& r : dataset.records) by_id[r.id] = &r;

  EvaluationReport report;
  std::vector<std::vector<std::uint8_t>> pred_slots, true_slots;
  // Per trace and interval, the lowest-id predicted record.
  std::map<int, std::vector<const LevelPrediction*>> plan;
  for (const auto& [id, p] : predictions) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw std::invalid_argument("prediction for unknown record " + std::to_string(id));
    const DatasetRecord& r = *it->second;
    if (p.a_levels.size() != L || p.b_levels.size() != L) {
      throw std::invalid_argument("prediction for record " + std::to_string(id) + " has the wrong link count");
    }
    for (std::size_t l = 0; l < L; ++l) {
      if (p.a_levels[l] >= h.quantization_levels || p.b_levels[l] >= h.quantization_levels) {
        throw std::invalid_argument("prediction for record " + std::to_string(id) + " has a level off the lattice");
      }
    }
    std::vector<std::uint8_t> slots;
    for (std::size_t l = 0; l < L; ++l) {
      slots.push_back(p.a_levels[l]);
      slots.push_back(p.b_levels[l]);
    }
    pred_slots.push_back(std::move(slots));
    true_slots.push_back(label_slots(r));
    auto& intervals = plan[r.trace];
    intervals.resize(h.num_intervals, nullptr);
    if (!intervals[r.interval]) intervals[r.interval] = &p;  // map order: lowest id first
  }
  report.records = predictions.size();
  report.f_micro = f_score(pred_slots, true_slots, FAverage::Micro, h.quantization_levels);
  report.f_macro = f_score(pred_slots, true_slots, FAverage::Macro, h.quantization_levels);
  report.f_micro_interval = f_score_interval(pred_slots, true_slots, FAverage::Micro, h.quantization_levels,
                                             {0.98, 1000, derive_seed(options.seed, 0x46424f4f54)});

  std::vector<std::pair<int, std::vector<const LevelPrediction*>>> work(plan.begin(), plan.end());
  report.cases.resize(work.size());
  parallel_for(work.size(), options.jobs, [&](std::size_t i) {
    const auto& [trace, parts] = work[i];
    StrategyMatrix s(h.num_links, h.num_intervals, h.quantization_levels);
    for (int t = 0; t < h.num_intervals; ++t) {
      if (!parts[t]) continue;
      for (LinkId l = 0; l < h.num_links; ++l) {
        s.set_level(Param::Infectivity, l, t, parts[t]->a_levels[l]);
        s.set_level(Param::Keep, l, t, parts[t]->b_levels[l]);
      }
    }
    const ReplayEngine engine(traces[trace], grid, replay);
    const std::uint64_t seed = derive_seed(options.seed, 0x4556414c, static_cast<std::uint64_t>(trace));
    EvaluationResult r = engine.run(s, seed, runs);
    score(r, engine.durations(), cost);
    EvaluationResult on = engine.run(all_on(h.num_links, h.num_intervals, AllOnVariant::MaxRetention,
                                            h.quantization_levels),
                                     seed, runs);
    score(on, engine.durations(), cost);
    report.cases[i] = {trace, r.feasible, r.cost, on.cost};
  });

  std::size_t rejected = 0, accepted_n = 0, counted = 0;
  double accepted_sum = 0.0, fallback_sum = 0.0;
  for (const auto& c : report.cases) {
    if (!c.feasible) ++rejected;
    if (!(c.all_on_cost > 0.0)) continue;
    ++counted;
    const double saving = resource_savings(c.cost, c.all_on_cost);
    if (c.feasible) {
      ++accepted_n;
      accepted_sum += saving;
      fallback_sum += saving;
    }
  }
  report.rejection_probability = report.cases.empty() ? 0.0 : static_cast<double>(rejected) / report.cases.size();
  report.savings_accepted = accepted_n > 0 ? accepted_sum / accepted_n : 0.0;
  report.savings_with_fallback = counted > 0 ? fallback_sum / counted : 0.0;
  return report;
}

double rejection_probability(const EvaluationReport& report) { return report.rejection_probability; }

nlohmann::json to_json(const EvaluationReport& report) {
  nlohmann::json cases = nlohmann::json::array();
  for (const auto& c : report.cases) {
    cases.push_back({{"trace", c.trace}, {"feasible", c.feasible}, {"cost", c.cost}, {"all_on_cost", c.all_on_cost}});
  }
  return {{"records", report.records},
          {"f_score_micro", report.f_micro},
          {"f_score_macro", report.f_macro},
          {"f_score_micro_interval", {report.f_micro_interval.lo, report.f_micro_interval.hi}},
          {"rejection_probability", report.rejection_probability},
          {"savings_accepted", report.savings_accepted},
          {"savings_with_fallback", report.savings_with_fallback},
          {"cases", std::move(cases)}};
}

}  // namespace cfc
