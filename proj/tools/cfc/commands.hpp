#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfc/scenario.hpp"
#include "manifest.hpp"

namespace cfc::cli {

/// Every value the command line (or a config file) can set.
struct Settings {
  // scenario
  int blocks_x = 3;
  int blocks_y = 4;
  double block_side = 150.0;
  std::string grid_file;
  std::vector<int> zoi;
  double arrival_rate = 3.0;
  std::string speed = "60";
  double tx_radius = 100.0;
  double duration = 3600.0;
  double warmup = 150.0;
  double sample_dt = 1.0;
  std::uint64_t seed = 1;
  std::vector<double> intervals{3600.0};
  double content_size = 3.2e7;
  double bandwidth = 4e6;
  double snr_db = 10.0;
  int runs = 8;
  std::uint64_t replay_seed = 1;
  double alpha_target = 0.9;
  double beta = 1.0;
  std::string all_on = "max-retention";
  std::string method = "greedy";
  int max_oracle_calls = 20000;
  double margin = 0.01;
  int search_runs = 8;
  std::uint64_t search_seed = 1;
  double anneal_temp = 0.05;
  double anneal_cooling = 0.9;
  int anneal_moves = 25;
  int jobs = 1;
  std::string manifest;

  // per command
  std::string out;
  std::string inspect;
  std::string trace;
  std::string strategy = "all-on";
  std::string report;
  std::string log;
  std::string features_csv;
  std::string dataset;
  std::string folds;
  int fold = -1;
  std::size_t records = 100;
  std::string sampler = "mixed";
  std::string label_mode = "sampled";
  int traces_per_config = 1;
  std::vector<std::string> speeds;
  std::vector<double> tx_radii;
  int k = 10;
  std::uint64_t split_seed = 1;
  std::string csv;
  std::string model = "knn";
  std::string model_file;
  int knn_k = 5;
  int max_depth = 12;
  int min_leaf = 1;
  int trees = 25;
  double feature_subsample = 1.0;
  bool no_bootstrap = false;
  std::size_t train_size = 0;
  std::vector<std::size_t> train_sizes;
  std::string predictions;
  std::string predictions_out;
  std::string scenario_name = "default";
  std::uint64_t eval_seed = 1;
  std::uint64_t dataset_seed = 1;
};

Scenario make_scenario(const Settings& s);
RoadGrid make_grid(const Settings& s);

int run_grid(const Settings& s, Manifest& m);
int run_simulate(const Settings& s, Manifest& m);
int run_replay(const Settings& s, Manifest& m);
int run_optimize(const Settings& s, Manifest& m);
int run_dataset_build(const Settings& s, Manifest& m);
int run_dataset_split(const Settings& s, Manifest& m);
int run_dataset_inspect(const Settings& s, Manifest& m);
int run_baseline_train(const Settings& s, Manifest& m);
int run_baseline_eval(const Settings& s, Manifest& m);
int run_cnn_export_config(const Settings& s, Manifest& m);
int run_cnn_eval_predictions(const Settings& s, Manifest& m);
int run_report(const Settings& s, Manifest& m);

}  // namespace cfc::cli
