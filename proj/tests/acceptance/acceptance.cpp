// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   cfc_acceptance [--jobs N] [--only NAME]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfc/baselines.hpp"
#include "cfc/cost_model.hpp"
#include "cfc/dataset.hpp"
#include "cfc/errors.hpp"
#include "cfc/evaluation.hpp"
#include "cfc/optimizer.hpp"
#include "cfc/parallel.hpp"
#include "cfc/replay.hpp"
#include "cfc/rng.hpp"
#include "cfc/scenario.hpp"
#include "enumeration.hpp"
#include "fixtures.hpp"
#include "synthetic.hpp"

namespace cfc {
namespace {

using Clock = std::chrono::steady_clock;

int g_jobs = 8;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

StrategyMatrix random_lattice(int links, int intervals, Rng& rng) {
  StrategyMatrix s(links, intervals);
  for (LinkId l = 0; l < links; ++l) {
    for (int t = 0; t < intervals; ++t) {
      s.set_level(Param::Infectivity, l, t, static_cast<int>(rng.below(11)));
      s.set_level(Param::Keep, l, t, static_cast<int>(rng.below(11)));
    }
  }
  return s;
}

Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  const RoadGrid grid = test::single_block({0, 3});
  ReplayConfig cfg;
  cfg.intervals = {8, 12};
  cfg.monte_carlo_runs = 10000;
  Rng rng(2024);
  double worst = 0.0;
  int fixtures = 0;
  const std::vector<std::pair<std::vector<PinnedNode>, double>> layouts = {
      {{{0, 10}, {0, 75}}, 100.0},                 // one contact
      {{{2, 10}, {0, 75}, {3, 10}}, 100.0},        // chain: two contacts
      {{{2, 10}, {0, 75}, {3, 10}}, 200.0},        // triangle: three contacts
      {{{0, 20}, {0, 60}, {1, 40}}, 100.0},        // same-link pair plus an isolated node
  };
  for (const auto& [nodes, radius] : layouts) {
    const ContactTrace tr = test::pinned_trace(grid, nodes, 20, radius);
    if (tr.contacts.size() > 3) return {false, "fixture has more than three contacts"};
    for (int rep = 0; rep < 3; ++rep) {
      StrategyMatrix s(4, 2, 0);
      for (LinkId l = 0; l < 4; ++l) {
        for (int t = 0; t < 2; ++t) {
          s.set(Param::Infectivity, l, t, rng.uniform());
          s.set(Param::Keep, l, t, rng.uniform());
        }
      }
      const oracle::Expectation want = oracle::enumerate(tr, 4, s, cfg);
      const EvaluationResult got = ReplayEngine(tr, grid, cfg).run(s, 100 + fixtures, cfg.monte_carlo_runs);
      for (LinkId l = 0; l < 4; ++l) {
        for (int t = 0; t < 2; ++t) {
          worst = std::max(worst, std::abs(got.features.at(Feature::MeanContentHolders, l, t) - want.holders[l][t]));
          worst = std::max(worst, std::abs(got.features.at(Feature::MeanConcurrentTransmissions, l, t) -
                                           want.transferring[l][t]));
        }
      }
      ++fixtures;
    }
  }
  const double elapsed = seconds_since(t0);
  return {worst <= 0.02 && elapsed < 10.0,
          fmt("%d fixtures x 10^4 runs, max |MC - exact| = %.4f (tol 0.02), %.2f s (limit 10 s)", fixtures, worst,
              elapsed)};
}

Outcome copy_count_ledger() {
  const Scenario scn = desk_scenario();
  const RoadGrid grid = scn.grid();
  std::vector<std::string> failures(100);
  std::vector<std::size_t> events(100, 0);
  parallel_for(100, g_jobs, [&](std::size_t i) {
    const ContactTrace tr = test::desk_trace(1000 + i);
    const ReplayEngine eng(tr, grid, scn.replay);
    Rng rng(derive_seed(77, i));
    ReplayLog log;
    eng.run(random_lattice(eng.num_links(), eng.num_intervals(), rng), derive_seed(78, i), 1, &log);
    std::vector<int> level(eng.window_samples(), 0);
    for (const auto& e : log.events) {
      const int expect = e.kind == HolderEventKind::Seed || e.kind == HolderEventKind::TransferKept ? 1
                         : e.kind == HolderEventKind::Drop || e.kind == HolderEventKind::Exit    ? -1
                                                                                                  : 0;
      if (e.delta != expect) failures[i] = "event delta does not match its kind";
      level[e.sample] += e.delta;
    }
    int running = 0;
    for (std::size_t k = 0; k < level.size(); ++k) {
      running += level[k];
      if (running != log.holders[0][k]) {
        failures[i] = fmt("sample %zu: ledger %d vs observed %d", k, running, log.holders[0][k]);
        break;
      }
    }
    events[i] = log.events.size();
  });
  std::size_t total = 0, bad = 0;
  std::string first;
  for (std::size_t i = 0; i < 100; ++i) {
    total += events[i];
    if (!failures[i].empty()) {
      if (!bad) first = fmt("replay %zu: %s", i, failures[i].c_str());
      ++bad;
    }
  }
  return {bad == 0, bad ? first : fmt("100 desk replays, %zu holder events, every sample balanced", total)};
}

Outcome feasibility_threshold() {
  LinkFeatures f(2, 3);
  const double alphas[3] = {0.89, 0.90, 0.91};
  for (int t = 0; t < 3; ++t) {
    f.at(Feature::MeanNodeCount, 0, t) = 60.0;
    f.at(Feature::MeanNodeCount, 1, t) = 40.0;
    f.at(Feature::MeanContentHolders, 0, t) = 54.0;
    f.at(Feature::MeanContentHolders, 1, t) = alphas[t] * 100.0 - 54.0;
  }
  const CostConfig cost;  // target 0.9
  std::string detail;
  bool ok = true;
  for (int t = 0; t < 3; ++t) {
    EvaluationResult r;
    r.features = f;
    r.success_ratios = {success_ratio(f, {0, 1}, t)};
    const bool feasible = is_feasible(r, cost);
    ok = ok && feasible == (t > 0);
    detail += fmt("%s%.2f -> %s", t ? ", " : "", *r.success_ratios[0], feasible ? "feasible" : "infeasible");
  }
  return {ok, detail + " (target 0.90)"};
}

Outcome optimizer_dominance() {
  const auto t0 = Clock::now();
  const Scenario scn = desk_scenario();
  const RoadGrid grid = scn.grid();
  constexpr int kRuns = 50;
  struct Row {
    bool feasible = false;
    double cost = 0.0, all_on = 0.0, min_alpha = 0.0;
    std::string error;
  };
  std::vector<Row> rows(kRuns);
  parallel_for(kRuns, g_jobs, [&](std::size_t i) {
    Row& row = rows[i];
    try {
      const ContactTrace tr = test::desk_trace(i + 1);
      const ReplayEngine eng(tr, grid, scn.replay);
      SearchConfig search = scn.search;
      search.rng_seed = i + 1;
      const OptimizeResult res = optimize(eng, scn.cost, search);
      // Independent check: a seed the search never used, four times its runs.
      const std::uint64_t seed = derive_seed(0xACCE, i);
      const int runs = 4 * search.monte_carlo_runs;
      EvaluationResult cand = eng.run(res.strategy, seed, runs);
      EvaluationResult on = eng.run(all_on(eng.num_links(), eng.num_intervals()), seed, runs);
      score(cand, eng.durations(), scn.cost);
      score(on, eng.durations(), scn.cost);
      const Feasibility f = check_feasibility(cand, scn.cost);
      row.feasible = f.feasible;
      row.min_alpha = f.slack + scn.cost.alpha_target;
      row.cost = cand.cost;
      row.all_on = on.cost;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });
  int feasible = 0, dominated = 0, positive = 0, errors = 0;
  double savings_sum = 0.0, worst_alpha = 1.0;
  for (const Row& r : rows) {
    if (!r.error.empty()) {
      ++errors;
      continue;
    }
    feasible += r.feasible;
    dominated += r.cost <= r.all_on;
    const double sav = r.all_on > 0 ? 1.0 - r.cost / r.all_on : 0.0;
    positive += sav > 0.0;
    savings_sum += sav;
    worst_alpha = std::min(worst_alpha, r.min_alpha);
  }
  const double elapsed = seconds_since(t0);
  const bool ok = errors == 0 && feasible == kRuns && dominated == kRuns && positive >= 0.95 * kRuns &&
                  elapsed < 30 * 60;
  return {ok, fmt("%d runs: feasible %d, cost <= all-on %d, positive savings %d, errors %d, lowest alpha %.4f, "
                  "mean savings %.1f%% (reference 37.5%%), %.0f s on %d workers",
                  kRuns, feasible, dominated, positive, errors, worst_alpha, 100.0 * savings_sum / kRuns, elapsed,
                  g_jobs)};
}

Outcome exhaustive_oracle() {
  // One link, one interval, lattice {0, 0.5, 1}: pinned nodes plus a light
  // stream of passing vehicles.
  const RoadGrid grid({RoadGrid::LinkSpec{{0, 0}, {150, 0}, true}}, {0});
  ReplayConfig replay;
  replay.intervals = {60};
  SearchConfig search;
  search.quantization_levels = 3;
  search.monte_carlo_runs = 16;
  int compared = 0, within = 0;
  double worst = 0.0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    Rng rng(derive_seed(seed, 0x45584841));
    MobilityConfig mob;
    mob.arrival_rate = 0.03;
    mob.duration = 60;
    mob.warmup = 20;
    mob.rng_seed = seed;
    SimulationHooks hooks;
    const int pinned = 2 + static_cast<int>(rng.below(3));
    for (int n = 0; n < pinned; ++n) hooks.pinned.push_back({0, rng.uniform(0.0, 150.0)});
    const ContactTrace tr = simulate_mobility(grid, mob, hooks);
    const ReplayEngine eng(tr, grid, replay);
    search.rng_seed = seed;
    double ex_cost = 0.0;
    try {
      ex_cost = exhaustive_solve(eng, CostConfig{}, search).search_cost;
    } catch (const NoFeasibleSolution&) {
      continue;
    }
    const OptimizeResult gr = optimize(eng, CostConfig{}, search);
    ++compared;
    const double gap = ex_cost > 0 ? gr.search_cost / ex_cost - 1.0 : (gr.search_cost > 0 ? 1.0 : 0.0);
    worst = std::max(worst, gap);
    within += gap <= 0.05;
  }
  return {compared >= 8 && within == compared,
          fmt("%d fixtures with a feasible lattice point, greedy within 5%% on %d, worst gap %+.2f%%", compared, within,
              100.0 * worst)};
}

Outcome baseline_sanity() {
  std::string detail;
  bool ok = true;

  const TrainingSet ts = test::threshold_separable(1000, 31);
  const TrainingSet train = test::slice(ts, 0, 800), held = test::slice(ts, 800, 1000);
  const double f_dt = f_score(MultiLabelModel::train(TreeSpec{}, train).predict(held.inputs), held.labels);
  ok = ok && f_dt >= 0.95;
  detail += fmt("DT micro-F1 %.4f (>= 0.95)", f_dt);

  TrainingSet scaled = ts;
  for (auto& x : scaled.inputs) {
    x[0] *= 10.0;
    x[1] = 250.0 * x[1] - 3.0;
  }
  bool invariant = true;
  for (int k : {1, 5, 9}) {
    const auto a = MultiLabelModel::train(KnnSpec{k}, train).predict(held.inputs);
    const auto b = MultiLabelModel::train(KnnSpec{k}, test::slice(scaled, 0, 800))
                       .predict(test::slice(scaled, 800, 1000).inputs);
    invariant = invariant && a == b;
  }
  ok = ok && invariant;
  detail += invariant ? "; KNN scale-invariant" : "; KNN predictions change with feature scale";

  const Scenario scn = desk_scenario();
  DatasetOptions opts;
  opts.traces_per_config = 6;
  opts.jobs = g_jobs;
  const DatasetBuild b = build_dataset(scn.grid(), {scn.mobility}, scn.replay, scn.cost,
                                       StrategySampler::of(StrategySampler::Kind::AllOn), 12, opts);
  EvaluationOptions eval;
  eval.monte_carlo_runs = 32;
  eval.jobs = g_jobs;
  std::vector<std::size_t> rows_all(b.dataset.records.size());
  for (std::size_t i = 0; i < rows_all.size(); ++i) rows_all[i] = i;
  TrainingSet labels = training_set(b.dataset);
  auto constant_model = [&](std::uint8_t level) {
    TrainingSet t = labels;
    for (auto& y : t.labels) std::fill(y.begin(), y.end(), level);
    return MultiLabelModel::train(KnnSpec{}, t);
  };
  const EvaluationReport on_all =
      evaluate_predictions(b.dataset, b.traces, predict_records(constant_model(10), b.dataset, rows_all), eval);
  // Keep the traces on which all-on meets the target on the evaluation replay.
  std::vector<std::size_t> rows;
  std::set<int> good;
  for (const auto& c : on_all.cases) {
    if (c.feasible) good.insert(c.trace);
  }
  for (std::size_t i = 0; i < b.dataset.records.size(); ++i) {
    if (good.count(b.dataset.records[i].trace)) rows.push_back(i);
  }
  if (good.empty()) return {false, detail + "; no fixture trace where all-on is feasible"};
  const double rej_on = rejection_probability(
      evaluate_predictions(b.dataset, b.traces, predict_records(constant_model(10), b.dataset, rows), eval));
  const double rej_off = rejection_probability(
      evaluate_predictions(b.dataset, b.traces, predict_records(constant_model(0), b.dataset, rows), eval));
  ok = ok && rej_on == 0.0 && rej_off == 1.0;
  detail += fmt("; on %zu traces where all-on is feasible: all-off rejection %.2f, all-on rejection %.2f", good.size(),
                rej_off, rej_on);
  return {ok, detail};
}

Outcome determinism() {
  const Scenario scn = desk_scenario();
  const RoadGrid grid = scn.grid();
  auto pipeline = [&](int jobs) {
    std::vector<std::string> out;
    const ContactTrace tr = simulate_mobility(grid, [&] {
      MobilityConfig m = scn.mobility;
      m.rng_seed = 4242;
      return m;
    }());
    out.push_back(serialize_trace(tr));
    const ReplayEngine eng(tr, grid, scn.replay);
    Rng rng(5);
    out.push_back(to_json(eng.run(random_lattice(eng.num_links(), 1, rng))).dump());
    SearchConfig search = scn.search;
    search.max_oracle_calls = 300;
    search.jobs = jobs;
    const OptimizeResult opt = optimize(eng, scn.cost, search);
    std::ostringstream log;
    write_run_log(log, opt);
    out.push_back(to_json(opt, scn.cost).dump() + log.str());
    SearchConfig anneal = search;
    anneal.method = SearchMethod::SimulatedAnnealing;
    out.push_back(to_json(optimize(eng, scn.cost, anneal), scn.cost).dump());

    StrategySampler sampler = StrategySampler::mixed();
    sampler.search = search;
    sampler.search.max_oracle_calls = 150;
    DatasetOptions opts;
    opts.traces_per_config = 3;
    opts.seed = 9;
    opts.jobs = jobs;
    const DatasetBuild b = build_dataset(grid, {scn.mobility}, scn.replay, scn.cost, sampler, 40, opts);
    std::ostringstream ds;
    write_dataset(ds, b.dataset);
    out.push_back(ds.str());
    const auto folds = kfold_split(b.dataset.records.size(), 4, 3);
    std::string split;
    for (const auto& f : folds) {
      for (auto i : f.validation) split += std::to_string(i) + ",";
    }
    out.push_back(split);
    const TrainingSet ts = training_set(b.dataset, folds[0].train);
    for (const ModelSpec& spec : {ModelSpec{KnnSpec{}}, ModelSpec{TreeSpec{}}, ModelSpec{ForestSpec{}}}) {
      const MultiLabelModel m = MultiLabelModel::train(spec, ts, jobs);
      out.push_back(m.to_json().dump());
      EvaluationOptions eval;
      eval.jobs = jobs;
      out.push_back(to_json(evaluate_predictions(b.dataset, b.traces,
                                                 predict_records(m, b.dataset, folds[0].validation, jobs), eval))
                        .dump());
    }
    return out;
  };
  const char* stages[] = {"simulate", "replay", "optimize", "anneal", "dataset", "split",
                          "knn",      "knn eval", "dt",     "dt eval", "rf",     "rf eval"};
  const auto a = pipeline(1);
  const auto b = pipeline(1);
  const auto c = pipeline(g_jobs);
  std::string diff;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) diff += std::string(diff.empty() ? "" : ", ") + stages[i] + " (repeat)";
    if (a[i] != c[i]) diff += std::string(diff.empty() ? "" : ", ") + stages[i] + " (workers)";
  }
  return {diff.empty(), diff.empty() ? fmt("%zu stages byte-identical across repeats and 1 vs %d workers", a.size(),
                                           g_jobs)
                                     : "differs: " + diff};
}

Outcome dataset_roundtrip() {
  const Scenario scn = desk_scenario();
  auto sampled = std::make_shared<std::vector<StrategyMatrix>>();
  StrategySampler sampler = StrategySampler::of(StrategySampler::Kind::Custom);
  sampler.custom = [sampled](const ReplayEngine& eng, int, Rng& rng) {
    StrategyMatrix s(eng.num_links(), eng.num_intervals());
    for (LinkId l = 0; l < eng.num_links(); ++l) {
      s.set_level(Param::Infectivity, l, 0, static_cast<int>(rng.below(11)));
      s.set_level(Param::Keep, l, 0, 5 + static_cast<int>(rng.below(6)));
    }
    sampled->push_back(s);
    return s;
  };
  DatasetOptions opts;
  opts.traces_per_config = 10;
  opts.seed = 17;
  const DatasetBuild b = build_dataset(scn.grid(), {scn.mobility}, scn.replay, scn.cost, sampler, 1000, opts);
  const Dataset& ds = b.dataset;
  if (ds.records.size() != 1000 || sampled->size() != 1000) return {false, "wrong record count"};

  std::ostringstream first;
  write_dataset(first, ds);
  std::istringstream in(first.str());
  const Dataset back = read_dataset(in);
  std::ostringstream second;
  write_dataset(second, back);
  const bool round_trip = back == ds && second.str() == first.str();

  std::vector<std::optional<ReplayEngine>> engines(b.traces.size());
  for (std::size_t i = 0; i < b.traces.size(); ++i) engines[i].emplace(b.traces[i], scn.grid(), scn.replay);
  int feasible = 0, mislabeled = 0, wrong_feasibility = 0;
  for (const auto& r : ds.records) {
    EvaluationResult check = engines[r.trace]->run((*sampled)[r.couple], r.replay_seed, scn.replay.monte_carlo_runs);
    score(check, scn.replay.intervals, scn.cost);
    wrong_feasibility += check.feasible != r.feasible;
    bool zero = true;
    for (LinkId l = 0; l < ds.header.num_links; ++l) zero = zero && !r.a_levels[l] && !r.b_levels[l];
    if (r.feasible) {
      ++feasible;
      mislabeled += couple_strategy(ds, r.couple) != (*sampled)[r.couple];
    } else {
      mislabeled += !zero;
    }
  }
  const bool ok = round_trip && wrong_feasibility == 0 && mislabeled == 0 && feasible > 0 && feasible < 1000;
  return {ok, fmt("1000 records: round trip %s, %d feasible, %d infeasible all carry all-off labels: %s, "
                  "stored feasibility reproduced: %s",
                  round_trip ? "identical" : "DIFFERS", feasible, 1000 - feasible, mislabeled ? "NO" : "yes",
                  wrong_feasibility ? "NO" : "yes")};
}

}  // namespace
}  // namespace cfc

int main(int argc, char** argv) {
  std::string only;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--jobs") && i + 1 < argc) {
      cfc::g_jobs = std::max(1, std::atoi(argv[++i]));
    } else if (!std::strcmp(argv[i], "--only") && i + 1 < argc) {
      only = argv[++i];
    } else {
      std::fprintf(stderr, "usage: %s [--jobs N] [--only NAME]\n", argv[0]);
      return 2;
    }
  }
  const std::vector<std::pair<const char*, std::function<cfc::Outcome()>>> criteria = {
      {"oracle_equivalence", cfc::oracle_equivalence},
      {"copy_count_ledger", cfc::copy_count_ledger},
      {"feasibility_threshold", cfc::feasibility_threshold},
      {"optimizer_dominance", cfc::optimizer_dominance},
      {"exhaustive_oracle", cfc::exhaustive_oracle},
      {"baseline_sanity", cfc::baseline_sanity},
      {"determinism", cfc::determinism},
      {"dataset_roundtrip", cfc::dataset_roundtrip},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    if (!only.empty() && only != name) continue;
    cfc::Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
