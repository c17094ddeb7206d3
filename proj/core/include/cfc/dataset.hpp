#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfc/cost_model.hpp"
#include "cfc/mobility.hpp"
#include "cfc/optimizer.hpp"
#include "cfc/replay.hpp"
#include "cfc/rng.hpp"
#include "cfc/road_grid.hpp"
#include "cfc/strategy.hpp"

namespace cfc {

inline constexpr int kDatasetSchemaVersion = 1;

struct ScenarioMeta {
  double tx_radius = 0.0;
  std::string speed_model;
  std::uint64_t seed = 0;

  friend bool operator==(const ScenarioMeta&, const ScenarioMeta&) = default;
};

/// One (P, A) couple restricted to a single interval: the features of every
/// link during that interval and the per-link strategy levels.
struct DatasetRecord {
  std::int64_t id = 0;
  std::int64_t couple = 0;  // records of one sampled strategy share this
  int trace = 0;            // index into the header's trace list
  int interval = 0;
  std::vector<double> features;        // link-major, kFeatureNames order per link
  std::vector<std::uint8_t> a_levels;  // per link
  std::vector<std::uint8_t> b_levels;
  bool feasible = false;
  std::optional<double> min_alpha;  // over defined intervals of the whole strategy
  double cost = 0.0;                // of the sampled strategy
  std::uint64_t replay_seed = 0;
  ScenarioMeta meta;

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

struct TraceRef {
  int index = 0;
  std::string file;  // relative to the dataset file; empty when not saved
  MobilityConfig mobility;

  friend bool operator==(const TraceRef& x, const TraceRef& y) {
    return x.index == y.index && x.file == y.file && to_json(x.mobility) == to_json(y.mobility);
  }
};

struct DatasetHeader {
  int schema_version = kDatasetSchemaVersion;
  int num_links = 0;
  int num_intervals = 0;
  int quantization_levels = kDefaultQuantization;
  double alpha_target = 0.9;
  std::vector<double> durations;
  GridLayout layout;
  nlohmann::json grid;    // grid_to_json of the scenario grid
  nlohmann::json replay;  // replay and cost settings the labels were computed with
  std::vector<TraceRef> traces;

  /// Positions within a record's feature vector available at inference time.
  std::vector<int> inference_columns() const;

  friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

struct Dataset {
  DatasetHeader header;
  std::vector<DatasetRecord> records;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Mobility (inference-time) features of a record, link-major.
std::vector<double> mobility_inputs(const DatasetRecord& record);

struct StrategySampler {
  enum class Kind { Mixed, UniformLattice, OptimizerDerived, AllOff, AllOn, Custom };

  Kind kind = Kind::Mixed;
  double optimizer_fraction = 0.5;  // Mixed only
  int perturb_entries = 3;          // lattice steps applied to an optimizer output
  SearchConfig search;              // how optimizer outputs are computed
  std::function<StrategyMatrix(const ReplayEngine&, int trace, Rng&)> custom;

  static StrategySampler mixed() { return {}; }
  static StrategySampler of(Kind kind) {
    StrategySampler s;
    s.kind = kind;
    return s;
  }
};

enum class LabelMode {
  Sampled,           // feasible records keep their own strategy
  CheapestFeasible,  // feasible records take the cheapest feasible strategy sampled on the same trace
};

struct DatasetOptions {
  std::uint64_t seed = 1;
  int traces_per_config = 1;
  LabelMode label_mode = LabelMode::Sampled;
  int jobs = 1;
};

struct DatasetBuild {
  Dataset dataset;
  std::vector<ContactTrace> traces;
};

/// Simulates one trace per (config, repetition), samples strategies,
/// replays them and labels each interval. Records violating the target are
/// labeled all-off. Deterministic for a fixed seed, whatever `jobs` is.
DatasetBuild build_dataset(const RoadGrid& grid, const std::vector<MobilityConfig>& mobility_cfgs,
                           const ReplayConfig& replay_cfg, const CostConfig& cost_cfg,
                           const StrategySampler& sampler, std::size_t n_records, const DatasetOptions& options = {});

/// Strategy of the couple a record belongs to, rebuilt from every record of
/// that couple.
StrategyMatrix couple_strategy(const Dataset& dataset, std::int64_t couple);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// k shuffled folds; the first n % k are one element larger.
std::vector<Fold> kfold_split(std::size_t n, int k, std::uint64_t seed);

nlohmann::json to_json(const DatasetHeader& header);
DatasetHeader dataset_header_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const DatasetRecord& record);
DatasetRecord dataset_record_from_json(const nlohmann::json& doc);

void write_dataset(std::ostream& out, const Dataset& dataset);
Dataset read_dataset(std::istream& in);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// One row per record: ids, f<link>_<feature> columns, then l<link>_a / l<link>_b.
void write_dataset_csv(std::ostream& out, const Dataset& dataset);

/// Counts, feasibility share and label histograms.
nlohmann::json inspect_dataset(const Dataset& dataset);

/// Loads trace `index` from its file (relative to `base_dir`), or simulates
/// it again from the recorded mobility settings when there is no file.
ContactTrace resolve_trace(const DatasetHeader& header, int index, const std::filesystem::path& base_dir);

/// Replays each distinct non-all-off couple (or every `stride`-th one) and
/// returns the ids of couples whose stored feasibility is not reproduced.
std::vector<std::int64_t> audit_labels(const Dataset& dataset, const std::vector<ContactTrace>& traces,
                                       std::size_t stride = 1);

}  // namespace cfc
