#pragma once

#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cfc/dataset.hpp"

namespace cfc {

/// Inputs and per-slot class labels. Slot 2l is link l's a level, slot
/// 2l + 1 its b level.
struct TrainingSet {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<std::uint8_t>> labels;
  int num_classes = kDefaultQuantization;

  std::size_t size() const { return inputs.size(); }
};

/// Mobility inputs and labels of the given records (all when empty).
TrainingSet training_set(const Dataset& dataset, const std::vector<std::size_t>& rows = {});

std::vector<std::uint8_t> label_slots(const DatasetRecord& record);

struct KnnSpec {
  int k = 5;
};

struct TreeSpec {
  int max_depth = 12;
  int min_leaf = 1;
};

struct ForestSpec {
  int n_trees = 25;
  int max_depth = 12;
  int min_leaf = 1;
  double feature_subsample = 1.0;  // share of inputs considered at each split
  bool bootstrap = true;
  std::uint64_t seed = 1;
};

using ModelSpec = std::variant<KnnSpec, TreeSpec, ForestSpec>;

/// One tree per output slot, split by Gini impurity on single-input thresholds.
struct DecisionTree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int label = 0;
  };
  std::vector<Node> nodes;

  int predict(const std::vector<double>& x) const;
};

class MultiLabelModel {
 public:
  enum class Kind { Knn, DecisionTree, RandomForest };

  /// Throws std::invalid_argument on an empty training set.
  static MultiLabelModel train(const ModelSpec& spec, const TrainingSet& data, int jobs = 1);

  Kind kind() const { return kind_; }
  int num_slots() const { return slots_; }
  std::vector<std::uint8_t> predict(const std::vector<double>& x) const;
  std::vector<std::vector<std::uint8_t>> predict(const std::vector<std::vector<double>>& xs, int jobs = 1) const;

  nlohmann::json to_json() const;
  static MultiLabelModel from_json(const nlohmann::json& doc);

 private:
  Kind kind_ = Kind::Knn;
  ModelSpec spec_;
  int slots_ = 0;
  int num_classes_ = 0;
  int num_inputs_ = 0;
  // KNN
  std::vector<double> mean_, scale_;
  std::vector<std::vector<double>> points_;
  std::vector<std::vector<std::uint8_t>> labels_;
  // trees: forest_[tree][slot]
  std::vector<std::vector<DecisionTree>> forest_;

  std::vector<double> normalize(const std::vector<double>& x) const;
};

const char* model_kind_name(MultiLabelModel::Kind kind);

void save_model(const MultiLabelModel& model, const std::filesystem::path& path);
MultiLabelModel load_model(const std::filesystem::path& path);

enum class FAverage { Micro, Macro };

/// F1 over per-slot exact level matches. Micro-averaging pools the
/// per-class counts of every slot; macro averages per-class F1 over the
/// classes that occur. Empty inputs score 1.
double f_score(const std::vector<std::vector<std::uint8_t>>& predictions,
               const std::vector<std::vector<std::uint8_t>>& truths, FAverage average = FAverage::Micro,
               int num_classes = kDefaultQuantization);

struct ScoreInterval {
  double lo = 1.0;
  double hi = 1.0;
};

struct BootstrapOptions {
  double confidence = 0.98;
  int resamples = 1000;
  std::uint64_t seed = 1;
};

/// Percentile bootstrap interval of f_score, resampling whole records.
ScoreInterval f_score_interval(const std::vector<std::vector<std::uint8_t>>& predictions,
                               const std::vector<std::vector<std::uint8_t>>& truths,
                               FAverage average = FAverage::Micro, int num_classes = kDefaultQuantization,
                               const BootstrapOptions& options = {});

}  // namespace cfc
