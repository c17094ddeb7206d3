#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "cfc/baselines.hpp"
#include "cfc/cnn_interop.hpp"
#include "cfc/dataset.hpp"
#include "cfc/errors.hpp"
#include "cfc/evaluation.hpp"
#include "cfc/optimizer.hpp"
#include "cfc/rng.hpp"

namespace cfc::cli {
namespace {

namespace fs = std::filesystem;

void emit(const nlohmann::json& doc, const std::string& path, Manifest& m) {
  if (path.empty()) {
    std::cout << doc.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << doc.dump(2) << '\n';
  m.add_output(path);
}

std::ofstream open_output(const std::string& path, Manifest& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  m.add_output(path);
  return out;
}

struct LoadedDataset {
  Dataset dataset;
  std::vector<ContactTrace> traces;
};

LoadedDataset load_with_traces(const std::string& path, Manifest& m) {
  LoadedDataset d{load_dataset(path), {}};
  m.add_input(path);
  const fs::path base = fs::path(path).parent_path();
  for (std::size_t i = 0; i < d.dataset.header.traces.size(); ++i) {
    d.traces.push_back(resolve_trace(d.dataset.header, static_cast<int>(i), base));
  }
  return d;
}

std::vector<Fold> load_folds(const std::string& path, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  const auto doc = nlohmann::json::parse(in);
  if (doc.at("records").get<std::size_t>() != n) {
    throw std::invalid_argument("folds were made for " + std::to_string(doc.at("records").get<std::size_t>()) +
                                " records, dataset has " + std::to_string(n));
  }
  std::vector<Fold> folds;
  for (const auto& f : doc.at("folds")) {
    Fold fold;
    fold.validation = f.at("validation").get<std::vector<std::size_t>>();
    std::vector<char> held(n, 0);
    for (auto i : fold.validation) held.at(i) = 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (!held[i]) fold.train.push_back(i);
    }
    folds.push_back(std::move(fold));
  }
  return folds;
}

// Training and held-out rows selected by --folds/--fold; everything otherwise.
Fold selected_rows(const Settings& s, std::size_t n) {
  Fold all;
  all.train.resize(n);
  std::iota(all.train.begin(), all.train.end(), 0);
  if (s.folds.empty()) {
    all.validation = all.train;
    return all;
  }
  const auto folds = load_folds(s.folds, n);
  if (s.fold < 0 || s.fold >= static_cast<int>(folds.size())) {
    throw std::invalid_argument("--fold must be in [0, " + std::to_string(folds.size()) + ")");
  }
  return folds[s.fold];
}

ModelSpec model_spec(const Settings& s, const std::string& kind) {
  if (kind == "knn") return KnnSpec{s.knn_k};
  if (kind == "dt") return TreeSpec{s.max_depth, s.min_leaf};
  return ForestSpec{s.trees, s.max_depth, s.min_leaf, s.feature_subsample, !s.no_bootstrap, s.seed};
}

std::vector<std::size_t> first_n(std::vector<std::size_t> rows, std::size_t n, std::uint64_t seed) {
  if (n == 0 || n >= rows.size()) return rows;
  Rng rng(seed);
  rng.shuffle(rows);
  rows.resize(n);
  std::sort(rows.begin(), rows.end());
  return rows;
}

nlohmann::json metrics_json(const EvaluationReport& r, const std::string& algorithm) {
  nlohmann::json doc = to_json(r);
  doc["algorithm"] = algorithm;
  return doc;
}

StrategyMatrix named_strategy(const std::string& name, const Settings& s, int links, int intervals) {
  const AllOnVariant variant = s.all_on == "literal" ? AllOnVariant::Literal : AllOnVariant::MaxRetention;
  if (name == "all-on") return all_on(links, intervals, variant);
  if (name == "all-off") return all_off(links, intervals);
  return load_strategy(name);
}

}  // namespace

RoadGrid make_grid(const Settings& s) {
  RoadGrid g = s.grid_file.empty() ? make_scenario(s).grid() : load_grid(s.grid_file);
  if (!s.zoi.empty()) g = set_zoi(g, std::set<LinkId>(s.zoi.begin(), s.zoi.end()));
  return g;
}

Scenario make_scenario(const Settings& s) {
  Scenario scn;
  scn.blocks_x = s.blocks_x;
  scn.blocks_y = s.blocks_y;
  scn.block_side = s.block_side;
  MobilityConfig& mob = scn.mobility;
  mob.arrival_rate = s.arrival_rate;
  mob.speed = SpeedModel::parse(s.speed);
  mob.tx_radius = s.tx_radius;
  mob.duration = s.duration;
  mob.warmup = s.warmup;
  mob.sample_dt = s.sample_dt;
  mob.rng_seed = s.seed;
  mob.validate();
  ReplayConfig& rep = scn.replay;
  rep.intervals = s.intervals;
  rep.content_size = s.content_size;
  rep.bandwidth = s.bandwidth;
  rep.snr = SnrModel::fixed_db(s.snr_db);
  rep.rng_seed = s.replay_seed;
  rep.monte_carlo_runs = s.runs;
  rep.validate();
  scn.cost = {s.content_size, s.beta, s.alpha_target};
  scn.cost.validate();
  SearchConfig& sc = scn.search;
  sc.method = s.method == "anneal" ? SearchMethod::SimulatedAnnealing : SearchMethod::GreedyDeactivation;
  sc.max_oracle_calls = s.max_oracle_calls;
  sc.margin = s.margin;
  sc.monte_carlo_runs = s.search_runs;
  sc.rng_seed = s.search_seed;
  sc.anneal = {s.anneal_temp, s.anneal_cooling, s.anneal_moves};
  sc.jobs = s.jobs;
  sc.validate();
  return scn;
}

int run_grid(const Settings& s, Manifest& m) {
  if (!s.inspect.empty()) {
    const RoadGrid g = load_grid(s.inspect);
    m.add_input(s.inspect);
    std::size_t border = 0;
    double length = 0.0;
    for (const auto& l : g.links()) {
      border += l.is_border ? 1 : 0;
      length += l.length;
    }
    const GridLayout layout = g.layout();
    emit({{"links", g.size()},
          {"border_links", border},
          {"intersections", g.intersections().size()},
          {"total_length", length},
          {"zoi", g.zoi()},
          {"layout", {{"rows", layout.rows}, {"cols", layout.cols}}}},
         s.out, m);
    return 0;
  }
  emit(grid_to_json(make_grid(s)), s.out, m);
  return 0;
}

int run_simulate(const Settings& s, Manifest& m) {
  const Scenario scn = make_scenario(s);
  const RoadGrid g = make_grid(s);
  const ContactTrace trace = simulate_mobility(g, scn.mobility);
  save_trace(trace, s.out);
  m.add_output(s.out);
  m.set_seed("mobility", scn.mobility.rng_seed);
  std::cerr << "simulated " << trace.num_nodes << " nodes, " << trace.contacts.size() << " contacts, "
            << trace.num_samples() << " samples\n";
  return 0;
}

int run_replay(const Settings& s, Manifest& m) {
  const Scenario scn = make_scenario(s);
  const RoadGrid g = make_grid(s);
  const ContactTrace trace = load_trace(s.trace);
  m.add_input(s.trace);
  const ReplayEngine engine(trace, g, scn.replay);
  const StrategyMatrix strategy = named_strategy(s.strategy, s, engine.num_links(), engine.num_intervals());
  if (s.strategy != "all-on" && s.strategy != "all-off") m.add_input(s.strategy);
  m.set_seed("replay", scn.replay.rng_seed);

  EvaluationResult result = engine.run(strategy);
  score(result, engine.durations(), scn.cost);
  EvaluationResult on = engine.run(all_on(engine.num_links(), engine.num_intervals()));
  score(on, engine.durations(), scn.cost);
  nlohmann::json report = cost_report(result, scn.cost, on.cost);
  report["all_on_cost"] = on.cost;
  report["runs"] = result.runs_aggregated;
  if (report.contains("warning")) std::cerr << "cfc: warning: " << report["warning"].get<std::string>() << '\n';
  emit(report, s.out, m);
  if (!s.features_csv.empty()) {
    auto out = open_output(s.features_csv, m);
    write_features_csv(out, result.features);
  }
  return 0;
}

int run_optimize(const Settings& s, Manifest& m) {
  const Scenario scn = make_scenario(s);
  const RoadGrid g = make_grid(s);
  const ContactTrace trace = load_trace(s.trace);
  m.add_input(s.trace);
  m.set_seed("search", scn.search.rng_seed);
  const ReplayEngine engine(trace, g, scn.replay);
  const OptimizeResult result = optimize(engine, scn.cost, scn.search);
  if (result.empty_zoi) std::cerr << "cfc: warning: the ZOI is never populated; returning the all-off strategy\n";
  save_strategy(result.strategy, s.out);
  m.add_output(s.out);
  if (!s.report.empty()) emit(to_json(result, scn.cost), s.report, m);
  if (!s.log.empty()) {
    auto out = open_output(s.log, m);
    write_run_log(out, result);
  }
  std::cerr << "cost " << result.search_cost << " vs all-on " << result.all_on_cost << " (savings "
            << result.savings() << "), " << result.oracle_calls << " replays\n";
  return 0;
}

int run_dataset_build(const Settings& s, Manifest& m) {
  const Scenario scn = make_scenario(s);
  const RoadGrid g = make_grid(s);
  const std::vector<std::string> speeds = s.speeds.empty() ? std::vector<std::string>{s.speed} : s.speeds;
  const std::vector<double> radii = s.tx_radii.empty() ? std::vector<double>{s.tx_radius} : s.tx_radii;
  std::vector<MobilityConfig> cfgs;
  for (const auto& sp : speeds) {
    for (double r : radii) {
      MobilityConfig c = scn.mobility;
      c.speed = SpeedModel::parse(sp);
      c.tx_radius = r;
      if (speeds.size() * radii.size() > 1) c.rng_seed = derive_seed(s.seed, cfgs.size());
      cfgs.push_back(c);
    }
  }
  StrategySampler sampler;
  if (s.sampler == "uniform") sampler.kind = StrategySampler::Kind::UniformLattice;
  if (s.sampler == "optimizer") sampler.kind = StrategySampler::Kind::OptimizerDerived;
  if (s.sampler == "all-off") sampler.kind = StrategySampler::Kind::AllOff;
  if (s.sampler == "all-on") sampler.kind = StrategySampler::Kind::AllOn;
  sampler.search = scn.search;
  DatasetOptions opts;
  opts.seed = s.dataset_seed;
  opts.traces_per_config = s.traces_per_config;
  opts.label_mode = s.label_mode == "cheapest-feasible" ? LabelMode::CheapestFeasible : LabelMode::Sampled;
  opts.jobs = s.jobs;

  DatasetBuild build = build_dataset(g, cfgs, scn.replay, scn.cost, sampler, s.records, opts);
  const fs::path out(s.out);
  m.add_output(out.string());
  const std::string trace_dir = out.filename().string() + ".traces";
  if (!build.traces.empty()) fs::create_directories(out.parent_path() / trace_dir);
  for (std::size_t i = 0; i < build.traces.size(); ++i) {
    const std::string rel = trace_dir + "/trace_" + std::to_string(i) + ".ndjson.gz";
    save_trace(build.traces[i], out.parent_path() / rel);
    m.add_output((out.parent_path() / rel).string());
    build.dataset.header.traces[i].file = rel;
  }
  save_dataset(build.dataset, out);
  m.set_seed("dataset", opts.seed);
  m.set_seed("mobility", s.seed);
  m.set_seed("replay", scn.replay.rng_seed);
  m.set_seed("search", scn.search.rng_seed);
  const auto summary = inspect_dataset(build.dataset);
  std::cerr << summary["records"] << " records, feasible fraction " << summary["feasible_fraction"] << '\n';
  return 0;
}

int run_dataset_split(const Settings& s, Manifest& m) {
  const Dataset ds = load_dataset(s.dataset);
  m.add_input(s.dataset);
  m.set_seed("split", s.split_seed);
  const auto folds = kfold_split(ds.records.size(), s.k, s.split_seed);
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& f : folds) arr.push_back({{"validation", f.validation}});
  emit({{"k", s.k}, {"seed", s.split_seed}, {"records", ds.records.size()}, {"folds", std::move(arr)}}, s.out, m);
  return 0;
}

int run_dataset_inspect(const Settings& s, Manifest& m) {
  const Dataset ds = load_dataset(s.dataset);
  m.add_input(s.dataset);
  emit(inspect_dataset(ds), s.out, m);
  if (!s.csv.empty()) {
    auto out = open_output(s.csv, m);
    write_dataset_csv(out, ds);
  }
  return 0;
}

int run_baseline_train(const Settings& s, Manifest& m) {
  const Dataset ds = load_dataset(s.dataset);
  m.add_input(s.dataset);
  const Fold rows = selected_rows(s, ds.records.size());
  const auto train_rows = first_n(rows.train, s.train_size, s.split_seed);
  const MultiLabelModel model = MultiLabelModel::train(model_spec(s, s.model), training_set(ds, train_rows), s.jobs);
  save_model(model, s.out);
  m.add_output(s.out);
  if (s.model == "rf") m.set_seed("forest", s.seed);
  std::cerr << "trained " << model_kind_name(model.kind()) << " on " << train_rows.size() << " records\n";
  return 0;
}

int run_baseline_eval(const Settings& s, Manifest& m) {
  const LoadedDataset d = load_with_traces(s.dataset, m);
  const MultiLabelModel model = load_model(s.model_file);
  m.add_input(s.model_file);
  m.set_seed("eval", s.eval_seed);
  const Fold rows = selected_rows(s, d.dataset.records.size());
  const Predictions predictions = predict_records(model, d.dataset, rows.validation, s.jobs);
  const EvaluationReport report = evaluate_predictions(d.dataset, d.traces, predictions, {s.eval_seed, 0, s.jobs});
  emit(metrics_json(report, model_kind_name(model.kind())), s.out, m);
  if (!s.predictions_out.empty()) {
    auto out = open_output(s.predictions_out, m);
    write_predictions(out, predictions);
  }
  return 0;
}

int run_cnn_export_config(const Settings& s, Manifest& m) {
  const Dataset ds = load_dataset(s.dataset);
  m.add_input(s.dataset);
  m.set_seed("split", s.split_seed);
  emit(cnn_training_config(ds.header, fs::absolute(s.dataset), s.k, s.split_seed), s.out, m);
  return 0;
}

int run_cnn_eval_predictions(const Settings& s, Manifest& m) {
  const LoadedDataset d = load_with_traces(s.dataset, m);
  const Predictions predictions = load_predictions(s.predictions);
  m.add_input(s.predictions);
  m.set_seed("eval", s.eval_seed);
  const EvaluationReport report = evaluate_predictions(d.dataset, d.traces, predictions, {s.eval_seed, 0, s.jobs});
  emit(metrics_json(report, "cnn"), s.out, m);
  return 0;
}

int run_report(const Settings& s, Manifest& m) {
  const LoadedDataset d = load_with_traces(s.dataset, m);
  const std::size_t n = d.dataset.records.size();
  const std::vector<Fold> folds = s.folds.empty() ? kfold_split(n, s.k, s.split_seed) : load_folds(s.folds, n);
  if (!s.folds.empty()) m.add_input(s.folds);
  m.set_seed("split", s.split_seed);
  m.set_seed("eval", s.eval_seed);

  auto out = open_output(s.out, m);
  out << "scenario,algorithm,train_size,f_score,rejection_prob,savings\n";
  out << std::setprecision(6);
  const std::vector<std::size_t> sizes = s.train_sizes.empty() ? std::vector<std::size_t>{0} : s.train_sizes;
  for (const std::string algo : {"knn", "dt", "rf"}) {
    for (std::size_t size : sizes) {
      double f = 0.0, rej = 0.0, sav = 0.0, used = 0.0;
      for (std::size_t i = 0; i < folds.size(); ++i) {
        const auto train_rows = first_n(folds[i].train, size, derive_seed(s.split_seed, i));
        const auto model = MultiLabelModel::train(model_spec(s, algo), training_set(d.dataset, train_rows), s.jobs);
        const auto pred = predict_records(model, d.dataset, folds[i].validation, s.jobs);
        const auto r = evaluate_predictions(d.dataset, d.traces, pred, {s.eval_seed, 0, s.jobs});
        f += r.f_micro;
        rej += r.rejection_probability;
        sav += r.savings_with_fallback;
        used += static_cast<double>(train_rows.size());
      }
      const double k = static_cast<double>(folds.size());
      out << s.scenario_name << ',' << algo << ',' << used / k << ',' << f / k << ',' << rej / k << ',' << sav / k
          << '\n';
    }
  }
  if (!s.predictions.empty()) {
    const Predictions pred = load_predictions(s.predictions);
    m.add_input(s.predictions);
    const auto r = evaluate_predictions(d.dataset, d.traces, pred, {s.eval_seed, 0, s.jobs});
    out << s.scenario_name << ",cnn,," << r.f_micro << ',' << r.rejection_probability << ','
        << r.savings_with_fallback << '\n';
  }
  return 0;
}

}  // namespace cfc::cli
