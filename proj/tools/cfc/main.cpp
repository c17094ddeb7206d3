#include <cstring>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cfc/errors.hpp"
#include "commands.hpp"
#include "json_config.hpp"

namespace {

using cfc::cli::Settings;

bool json_config_requested(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    std::string path;
    if (arg == "--config" && i + 1 < argc) {
      path = argv[i + 1];
    } else if (arg.rfind("--config=", 0) == 0) {
      path = arg.substr(9);
    }
    if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) return true;
  }
  return false;
}

struct DeskOverride {
  CLI::Option* option;
  std::function<void()> apply;
};

}  // namespace

int main(int argc, char** argv) {
  Settings s;
  CLI::App app{"Floating content toolkit: road grids, mobility traces, strategy replay and optimization"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(CFC_VERSION) + " (" + CFC_GIT_REV + ")");
  app.set_config("--config", "", "TOML or JSON file with option values (flags take precedence)");
  if (json_config_requested(argc, argv)) app.config_formatter(std::make_shared<cfc::cli::JsonConfig>());

  bool desk = false;
  app.add_flag("--desk-scale", desk, "Shrink duration, arrivals and search budget to laptop size");
  app.add_option("--jobs", s.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--manifest", s.manifest, "Manifest path (default: <first output>.manifest.json)");

  std::vector<DeskOverride> desk_overrides;
  const cfc::Scenario desk_scn = cfc::desk_scenario();
  auto desk_value = [&](CLI::Option* opt, auto& target, auto value) {
    desk_overrides.push_back({opt, [&target, value] { target = value; }});
  };

  // Scenario options live on the root and are accepted after the subcommand name too.
  app.add_option("--blocks-x", s.blocks_x, "Blocks along x")->check(CLI::PositiveNumber);
  app.add_option("--blocks-y", s.blocks_y, "Blocks along y")->check(CLI::PositiveNumber);
  app.add_option("--block-side", s.block_side, "Block side in meters");
  app.add_option("--grid", s.grid_file, "Grid JSON file instead of a generated Manhattan grid");
  app.add_option("--zoi", s.zoi, "ZOI link ids (default: central link)")->delimiter(',');
  desk_value(app.add_option("--arrival-rate", s.arrival_rate, "Arrivals per second per border link"),
             s.arrival_rate, desk_scn.mobility.arrival_rate);
  app.add_option("--speed", s.speed, "Speed model in km/h: 60 or [0,60]");
  app.add_option("--tx-radius", s.tx_radius, "Transmission radius in meters");
  desk_value(app.add_option("--duration", s.duration, "Recorded trace length in seconds"), s.duration,
             desk_scn.mobility.duration);
  desk_value(app.add_option("--warmup", s.warmup, "Simulated seconds before recording starts"), s.warmup,
             desk_scn.mobility.warmup);
  app.add_option("--sample-dt", s.sample_dt, "Sampling period in seconds");
  app.add_option("--seed", s.seed, "Mobility seed");
  desk_value(app.add_option("--intervals", s.intervals, "Interval durations in seconds")->delimiter(','),
             s.intervals, desk_scn.replay.intervals);
  app.add_option("--content-size", s.content_size, "Content size in bits");
  app.add_option("--bandwidth", s.bandwidth, "Channel bandwidth in Hz");
  app.add_option("--snr-db", s.snr_db, "Fixed SNR in dB");
  desk_value(app.add_option("--runs", s.runs, "Monte Carlo runs per replay")->check(CLI::PositiveNumber), s.runs,
             desk_scn.replay.monte_carlo_runs);
  app.add_option("--replay-seed", s.replay_seed, "Replay seed");
  app.add_option("--alpha-target", s.alpha_target, "Target success ratio");
  app.add_option("--beta", s.beta, "Weight of concurrent transmissions in the cost");
  app.add_option("--all-on", s.all_on, "All-on benchmark: max-retention (a=1,b=1) or literal (a=1,b=0)")
      ->check(CLI::IsMember({"max-retention", "literal"}));
  app.add_option("--method", s.method, "Search method")->check(CLI::IsMember({"greedy", "anneal"}));
  desk_value(app.add_option("--max-oracle-calls", s.max_oracle_calls, "Search budget in distinct replays"),
             s.max_oracle_calls, desk_scn.search.max_oracle_calls);
  app.add_option("--margin", s.margin, "Success-ratio margin the search keeps");
  desk_value(app.add_option("--search-runs", s.search_runs, "Monte Carlo runs per search evaluation"),
             s.search_runs, desk_scn.search.monte_carlo_runs);
  app.add_option("--search-seed", s.search_seed, "Search seed");
  app.add_option("--anneal-temp", s.anneal_temp, "Initial temperature relative to the all-on cost");
  app.add_option("--anneal-cooling", s.anneal_cooling, "Cooling factor per temperature step");
  app.add_option("--anneal-moves", s.anneal_moves, "Proposals per temperature step");

  std::vector<std::pair<CLI::App*, std::function<int(const Settings&, cfc::cli::Manifest&)>>> handlers;
  auto command = [&](CLI::App* parent, const std::string& name, const std::string& help, auto handler) {
    CLI::App* sub = parent->add_subcommand(name, help);
    sub->fallthrough();
    handlers.emplace_back(sub, handler);
    return sub;
  };

  auto* grid = command(&app, "grid", "Write or inspect a road grid", cfc::cli::run_grid);
  grid->add_option("--out", s.out, "Grid JSON output");
  grid->add_option("--inspect", s.inspect, "Grid JSON file to summarize")->check(CLI::ExistingFile);

  auto* simulate = command(&app, "simulate", "Generate a contact trace", cfc::cli::run_simulate);
  simulate->add_option("--out", s.out, "Trace output (.ndjson or .ndjson.gz)")->required();

  auto* replay = command(&app, "replay", "Evaluate a strategy on a trace", cfc::cli::run_replay);
  replay->add_option("--trace", s.trace, "Trace file")->required()->check(CLI::ExistingFile);
  replay->add_option("--strategy", s.strategy, "Strategy JSON file, all-on or all-off");
  replay->add_option("--out", s.out, "Report JSON output (default: stdout)");
  replay->add_option("--features-csv", s.features_csv, "Per-link feature table");

  auto* optimize = command(&app, "optimize", "Search a minimum-cost feasible strategy", cfc::cli::run_optimize);
  optimize->add_option("--trace", s.trace, "Trace file")->required()->check(CLI::ExistingFile);
  optimize->add_option("--out", s.out, "Strategy JSON output")->required();
  optimize->add_option("--report", s.report, "Summary JSON output");
  optimize->add_option("--log", s.log, "Run log (JSON lines)");

  CLI::App* dataset = app.add_subcommand("dataset", "Build, split and inspect training datasets");
  dataset->require_subcommand(1);
  dataset->fallthrough();
  auto* build = command(dataset, "build", "Simulate, sample, replay and label records", cfc::cli::run_dataset_build);
  build->add_option("--out", s.out, "Dataset output (.ndjson)")->required();
  build->add_option("--records", s.records, "Number of records");
  build->add_option("--sampler", s.sampler, "Strategy sampler")
      ->check(CLI::IsMember({"mixed", "uniform", "optimizer", "all-off", "all-on"}));
  build->add_option("--label-mode", s.label_mode, "Label of feasible records")
      ->check(CLI::IsMember({"sampled", "cheapest-feasible"}));
  build->add_option("--traces-per-config", s.traces_per_config, "Traces simulated per mobility setting");
  build->add_option("--speeds", s.speeds, "Speed models to sweep")->delimiter(';');
  build->add_option("--tx-radii", s.tx_radii, "Transmission radii to sweep")->delimiter(',');
  build->add_option("--dataset-seed", s.dataset_seed, "Sampling seed");
  auto* split = command(dataset, "split", "k-fold split of a dataset", cfc::cli::run_dataset_split);
  split->add_option("--dataset", s.dataset, "Dataset file")->required()->check(CLI::ExistingFile);
  split->add_option("--k", s.k, "Number of folds");
  split->add_option("--split-seed", s.split_seed, "Shuffle seed");
  split->add_option("--out", s.out, "Folds JSON output")->required();
  auto* inspect = command(dataset, "inspect", "Summarize a dataset", cfc::cli::run_dataset_inspect);
  inspect->add_option("--dataset", s.dataset, "Dataset file")->required()->check(CLI::ExistingFile);
  inspect->add_option("--out", s.out, "Summary JSON output (default: stdout)");
  inspect->add_option("--csv", s.csv, "Flat CSV export");

  CLI::App* baseline = app.add_subcommand("baseline", "Train and evaluate KNN, decision tree and random forest");
  baseline->require_subcommand(1);
  baseline->fallthrough();
  auto add_folds = [&](CLI::App* sub) {
    sub->add_option("--dataset", s.dataset, "Dataset file")->required()->check(CLI::ExistingFile);
    sub->add_option("--folds", s.folds, "Folds JSON from `dataset split`")->check(CLI::ExistingFile);
    sub->add_option("--fold", s.fold, "Fold index; its validation part is held out");
  };
  auto* train = command(baseline, "train", "Fit a baseline model", cfc::cli::run_baseline_train);
  add_folds(train);
  train->add_option("--model", s.model, "Model kind")->check(CLI::IsMember({"knn", "dt", "rf"}));
  train->add_option("--k", s.knn_k, "KNN neighbours");
  train->add_option("--max-depth", s.max_depth, "Tree depth limit");
  train->add_option("--min-leaf", s.min_leaf, "Minimum records per leaf");
  train->add_option("--trees", s.trees, "Forest size");
  train->add_option("--feature-subsample", s.feature_subsample, "Share of inputs tried per split");
  train->add_flag("--no-bootstrap", s.no_bootstrap, "Grow forest trees on the full training set");
  train->add_option("--train-size", s.train_size, "Use only the first N training records");
  train->add_option("--out", s.out, "Model JSON output")->required();
  auto* eval = command(baseline, "eval", "Score a model on held-out records", cfc::cli::run_baseline_eval);
  add_folds(eval);
  eval->add_option("--model-file", s.model_file, "Model JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--eval-seed", s.eval_seed, "Replay seed for rejection checks");
  eval->add_option("--out", s.out, "Metrics JSON output (default: stdout)");
  eval->add_option("--predictions-out", s.predictions_out, "Write predictions as JSON lines");

  CLI::App* cnn = app.add_subcommand("cnn", "Interfaces for an external CNN trainer");
  cnn->require_subcommand(1);
  cnn->fallthrough();
  auto* export_cfg = command(cnn, "export-config", "Write the trainer configuration", cfc::cli::run_cnn_export_config);
  export_cfg->add_option("--dataset", s.dataset, "Dataset file")->required()->check(CLI::ExistingFile);
  export_cfg->add_option("--k", s.k, "Number of folds");
  export_cfg->add_option("--split-seed", s.split_seed, "Shuffle seed");
  export_cfg->add_option("--out", s.out, "Config JSON output")->required();
  auto* eval_pred = command(cnn, "eval-predictions", "Score externally produced predictions",
                            cfc::cli::run_cnn_eval_predictions);
  eval_pred->add_option("--dataset", s.dataset, "Dataset file")->required()->check(CLI::ExistingFile);
  eval_pred->add_option("--predictions", s.predictions, "Predictions (JSON lines)")->required()->check(CLI::ExistingFile);
  eval_pred->add_option("--eval-seed", s.eval_seed, "Replay seed for rejection checks");
  eval_pred->add_option("--out", s.out, "Metrics JSON output (default: stdout)");

  auto* report = command(&app, "report", "F-score, rejection and savings table", cfc::cli::run_report);
  report->add_option("--dataset", s.dataset, "Dataset file")->required()->check(CLI::ExistingFile);
  report->add_option("--folds", s.folds, "Folds JSON (default: split with --k and --split-seed)")
      ->check(CLI::ExistingFile);
  report->add_option("--k", s.k, "Number of folds when splitting here");
  report->add_option("--split-seed", s.split_seed, "Shuffle seed");
  report->add_option("--train-sizes", s.train_sizes, "Training-set sizes (default: full folds)")->delimiter(',');
  report->add_option("--predictions", s.predictions, "CNN predictions to include")->check(CLI::ExistingFile);
  report->add_option("--scenario", s.scenario_name, "Scenario label for the table");
  report->add_option("--eval-seed", s.eval_seed, "Replay seed for rejection checks");
  report->add_option("--out", s.out, "CSV output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  if (desk) {
    for (auto& d : desk_overrides) {
      if (d.option->count() == 0) d.apply();
    }
  }

  std::vector<std::string> args(argv, argv + argc);
  for (auto& [sub, handler] : handlers) {
    if (!sub->parsed()) continue;
    std::string name = sub->get_name();
    if (sub->get_parent() != &app) name = sub->get_parent()->get_name() + " " + name;
    cfc::cli::Manifest manifest(name, args);
    if (auto* cfg = app.get_config_ptr(); cfg && cfg->count() > 0) manifest.add_config(cfg->as<std::string>());
    try {
      const int code = handler(s, manifest);
      if (manifest.has_outputs()) manifest.write(s.manifest.empty() ? manifest.default_path() : std::filesystem::path(s.manifest));
      return code;
    } catch (const cfc::NoFeasibleSolution& e) {
      std::cerr << "cfc: " << e.what() << '\n';
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "cfc: error: " << e.what() << '\n';
      return 1;
    }
  }
  return 1;
}
