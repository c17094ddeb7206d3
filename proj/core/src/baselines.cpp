#include "cfc/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "cfc/errors.hpp"
#include "cfc/parallel.hpp"
#include "cfc/rng.hpp"

namespace cfc {
namespace {

constexpr int kModelVersion = 1;

int majority(const std::vector<int>& counts) {
  // Lowest class wins ties.
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

double gini(const std::vector<int>& counts, int n) {
  if (n == 0) return 0.0;
  double s = 0.0;
  for (int c : counts) s += static_cast<double>(c) * c;
  return 1.0 - s / (static_cast<double>(n) * n);
}

struct TreeBuilder {
  const TrainingSet& data;
  int slot;
  int max_depth;
  int min_leaf;
  int features_per_split;
  Rng* rng;  // feature sampling; null when every feature is tried
  DecisionTree tree;

  int build(std::vector<std::size_t>& rows, int depth) {
    const int n = static_cast<int>(rows.size());
    std::vector<int> counts(data.num_classes, 0);
    for (auto r : rows) ++counts[data.labels[r][slot]];
    const int node = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    tree.nodes[node].label = majority(counts);
    const double parent = gini(counts, n);
    if (depth >= max_depth || parent == 0.0 || n < 2 * min_leaf) return node;

    const int d = static_cast<int>(data.inputs[rows[0]].size());
    std::vector<int> features(d);
    std::iota(features.begin(), features.end(), 0);
    if (rng && features_per_split < d) {
      rng->shuffle(features);
      features.resize(features_per_split);
      std::sort(features.begin(), features.end());
    }

    double best_impurity = parent - 1e-12;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::size_t> order(rows);
    for (int f : features) {
      std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        const double vx = data.inputs[x][f], vy = data.inputs[y][f];
        return vx < vy || (vx == vy && x < y);
      });
      std::vector<int> left(data.num_classes, 0), right(counts);
      for (int i = 0; i + 1 < n; ++i) {
        const int c = data.labels[order[i]][slot];
        ++left[c];
        --right[c];
        const double v = data.inputs[order[i]][f], next = data.inputs[order[i + 1]][f];
        if (v == next || i + 1 < min_leaf || n - i - 1 < min_leaf) continue;
        const double impurity = ((i + 1) * gini(left, i + 1) + (n - i - 1) * gini(right, n - i - 1)) / n;
        if (impurity < best_impurity) {
          best_impurity = impurity;
          best_feature = f;
          best_threshold = v + (next - v) / 2.0;
        }
      }
    }
    if (best_feature < 0) return node;

    std::vector<std::size_t> lo, hi;
    for (auto r : rows) (data.inputs[r][best_feature] <= best_threshold ? lo : hi).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = build(lo, depth + 1);
    const int h = build(hi, depth + 1);
    tree.nodes[node].feature = best_feature;
    tree.nodes[node].threshold = best_threshold;
    tree.nodes[node].left = l;
    tree.nodes[node].right = h;
    return node;
  }
};

DecisionTree grow_tree(const TrainingSet& data, std::vector<std::size_t> rows, int slot, int max_depth, int min_leaf,
                       int features_per_split, Rng* rng) {
  TreeBuilder b{data, slot, max_depth, min_leaf, features_per_split, rng, {}};
  b.build(rows, 0);
  return std::move(b.tree);
}

nlohmann::json tree_to_json(const DecisionTree& t) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.label});
  return nodes;
}

DecisionTree tree_from_json(const nlohmann::json& doc) {
  DecisionTree t;
  for (const auto& n : doc) {
    t.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                       n.at(4).get<int>()});
  }
  const int size = static_cast<int>(t.nodes.size());
  for (const auto& n : t.nodes) {
    if (n.feature >= 0 && (n.left < 0 || n.left >= size || n.right < 0 || n.right >= size)) {
      throw FormatError("tree node points outside the tree");
    }
  }
  if (t.nodes.empty()) throw FormatError("empty tree");
  return t;
}

void validate_set(const TrainingSet& data) {
  if (data.size() == 0) throw std::invalid_argument("cannot train on an empty training set");
  if (data.labels.size() != data.size()) throw std::invalid_argument("inputs and labels differ in length");
  const std::size_t d = data.inputs[0].size(), s = data.labels[0].size();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.inputs[i].size() != d || data.labels[i].size() != s) {
      throw std::invalid_argument("training rows differ in width");
    }
    for (auto v : data.labels[i]) {
      if (v >= data.num_classes) throw std::invalid_argument("label level beyond the class count");
    }
  }
}

}  // namespace

std::vector<std::uint8_t> label_slots(const DatasetRecord& record) {
  std::vector<std::uint8_t> out;
  out.reserve(record.a_levels.size() * 2);
  for (std::size_t l = 0; l < record.a_levels.size(); ++l) {
    out.push_back(record.a_levels[l]);
    out.push_back(record.b_levels[l]);
  }
  return out;
}

TrainingSet training_set(const Dataset& dataset, const std::vector<std::size_t>& rows) {
  TrainingSet set;
  set.num_classes = dataset.header.quantization_levels;
  auto add = [&](const DatasetRecord& r) {
    set.inputs.push_back(mobility_inputs(r));
    set.labels.push_back(label_slots(r));
  };
  if (rows.empty()) {
    for (const auto& r : dataset.records) add(r);
  } else {
    for (auto i : rows) add(dataset.records.at(i));
  }
  return set;
}

int DecisionTree::predict(const std::vector<double>& x) const {
  int i = 0;
  while (nodes[i].feature >= 0) i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
  return nodes[i].label;
}

const char* model_kind_name(MultiLabelModel::Kind kind) {
  switch (kind) {
    case MultiLabelModel::Kind::Knn: return "knn";
    case MultiLabelModel::Kind::DecisionTree: return "dt";
    case MultiLabelModel::Kind::RandomForest: return "rf";
  }
  return "?";
}

MultiLabelModel MultiLabelModel::train(const ModelSpec& spec, const TrainingSet& data, int jobs) {
  validate_set(data);
  MultiLabelModel m;
  m.spec_ = spec;
  m.slots_ = static_cast<int>(data.labels[0].size());
  m.num_classes_ = data.num_classes;
  m.num_inputs_ = static_cast<int>(data.inputs[0].size());
  const std::size_t n = data.size(), d = m.num_inputs_;

  if (const auto* knn = std::get_if<KnnSpec>(&spec)) {
    if (knn->k < 1) throw std::invalid_argument("k must be >= 1");
    m.kind_ = Kind::Knn;
    m.mean_.assign(d, 0.0);
    m.scale_.assign(d, 1.0);
    for (std::size_t j = 0; j < d; ++j) {
      double sum = 0.0, peak = 0.0;
      for (const auto& x : data.inputs) {
        sum += x[j];
        peak = std::max(peak, std::abs(x[j]));
      }
      const double mean = sum / n;
      double var = 0.0;
      for (const auto& x : data.inputs) var += (x[j] - mean) * (x[j] - mean);
      const double sd = std::sqrt(var / n);
      m.mean_[j] = mean;
      // Constant columns carry no information; a zero scale drops them.
      m.scale_[j] = sd > 1e-9 * peak && sd > 0.0 ? 1.0 / sd : 0.0;
    }
    m.labels_ = data.labels;
    for (const auto& x : data.inputs) m.points_.push_back(m.normalize(x));
    return m;
  }

  ForestSpec forest;
  if (const auto* tree = std::get_if<TreeSpec>(&spec)) {
    m.kind_ = Kind::DecisionTree;
    forest = {1, tree->max_depth, tree->min_leaf, 1.0, false, 0};
  } else {
    m.kind_ = Kind::RandomForest;
    forest = std::get<ForestSpec>(spec);
    if (forest.n_trees < 1) throw std::invalid_argument("n_trees must be >= 1");
    if (!(forest.feature_subsample > 0.0 && forest.feature_subsample <= 1.0)) {
      throw std::invalid_argument("feature_subsample must be in (0, 1]");
    }
  }
  if (forest.max_depth < 0 || forest.min_leaf < 1) throw std::invalid_argument("invalid tree limits");
  const int per_split =
      std::max(1, static_cast<int>(std::ceil(forest.feature_subsample * static_cast<double>(d) - 1e-9)));

  m.forest_.assign(forest.n_trees, std::vector<DecisionTree>(m.slots_));
  const std::size_t jobs_total = static_cast<std::size_t>(forest.n_trees) * m.slots_;
  parallel_for(jobs_total, jobs, [&](std::size_t job) {
    const int tree = static_cast<int>(job / m.slots_), slot = static_cast<int>(job % m.slots_);
    std::vector<std::size_t> rows(n);
    if (forest.bootstrap) {
      Rng bag(derive_seed(forest.seed, 0x42414747, tree));  // same bag for every slot of a tree
      for (auto& r : rows) r = bag.below(n);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    Rng features(derive_seed(forest.seed, 0x46454154, tree, slot));
    m.forest_[tree][slot] = grow_tree(data, std::move(rows), slot, forest.max_depth, forest.min_leaf, per_split,
                                      per_split < static_cast<int>(d) ? &features : nullptr);
  });
  return m;
}

std::vector<double> MultiLabelModel::normalize(const std::vector<double>& x) const {
  std::vector<double> z(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - mean_[j]) * scale_[j];
  return z;
}

std::vector<std::uint8_t> MultiLabelModel::predict(const std::vector<double>& x) const {
  if (static_cast<int>(x.size()) != num_inputs_) {
    throw std::invalid_argument("model expects " + std::to_string(num_inputs_) + " inputs, got " +
                                std::to_string(x.size()));
  }
  std::vector<std::uint8_t> out(slots_);
  if (kind_ == Kind::Knn) {
    const std::vector<double> z = normalize(x);
    std::vector<std::pair<double, std::size_t>> dist(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < z.size(); ++j) s += (z[j] - points_[i][j]) * (z[j] - points_[i][j]);
      // Rounded so that rescaled inputs order neighbours identically.
      dist[i] = {std::nearbyint(s * 1e9), i};
    }
    const std::size_t k = std::min<std::size_t>(std::get<KnnSpec>(spec_).k, dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    for (int s = 0; s < slots_; ++s) {
      std::vector<int> votes(num_classes_, 0);
      for (std::size_t i = 0; i < k; ++i) ++votes[labels_[dist[i].second][s]];
      const int top = *std::max_element(votes.begin(), votes.end());
      // Ties go to the class of the nearest neighbour among the tied ones.
      for (std::size_t i = 0; i < k; ++i) {
        const int c = labels_[dist[i].second][s];
        if (votes[c] == top) {
          out[s] = static_cast<std::uint8_t>(c);
          break;
        }
      }
    }
    return out;
  }
  for (int s = 0; s < slots_; ++s) {
    std::vector<int> votes(num_classes_, 0);
    for (const auto& tree : forest_) ++votes[tree[s].predict(x)];
    out[s] = static_cast<std::uint8_t>(majority(votes));
  }
  return out;
}

std::vector<std::vector<std::uint8_t>> MultiLabelModel::predict(const std::vector<std::vector<double>>& xs,
                                                                 int jobs) const {
  std::vector<std::vector<std::uint8_t>> out(xs.size());
  parallel_for(xs.size(), jobs, [&](std::size_t i) { out[i] = predict(xs[i]); });
  return out;
}

nlohmann::json MultiLabelModel::to_json() const {
  nlohmann::json params;
  if (const auto* k = std::get_if<KnnSpec>(&spec_)) {
    params = {{"k", k->k}};
  } else if (const auto* t = std::get_if<TreeSpec>(&spec_)) {
    params = {{"max_depth", t->max_depth}, {"min_leaf", t->min_leaf}};
  } else {
    const auto& f = std::get<ForestSpec>(spec_);
    params = {{"n_trees", f.n_trees},     {"max_depth", f.max_depth}, {"min_leaf", f.min_leaf},
              {"feature_subsample", f.feature_subsample}, {"bootstrap", f.bootstrap}, {"seed", f.seed}};
  }
  nlohmann::json doc = {{"format", "cfc-model"}, {"version", kModelVersion}, {"kind", model_kind_name(kind_)},
                        {"params", params},      {"slots", slots_},        {"num_classes", num_classes_},
                        {"num_inputs", num_inputs_}};
  if (kind_ == Kind::Knn) {
    doc["mean"] = mean_;
    doc["scale"] = scale_;
    doc["points"] = points_;
    doc["labels"] = labels_;
  } else {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : forest_) {
      nlohmann::json slots = nlohmann::json::array();
      for (const auto& t : tree) slots.push_back(tree_to_json(t));
      trees.push_back(std::move(slots));
    }
    doc["trees"] = std::move(trees);
  }
  return doc;
}

MultiLabelModel MultiLabelModel::from_json(const nlohmann::json& doc) {
  MultiLabelModel m;
  try {
    if (doc.at("format").get<std::string>() != "cfc-model") throw FormatError("not a cfc model document");
    if (doc.at("version").get<int>() != kModelVersion) throw FormatError("unsupported model version");
    const std::string kind = doc.at("kind").get<std::string>();
    const auto& p = doc.at("params");
    m.slots_ = doc.at("slots").get<int>();
    m.num_classes_ = doc.at("num_classes").get<int>();
    m.num_inputs_ = doc.at("num_inputs").get<int>();
    if (kind == "knn") {
      m.kind_ = Kind::Knn;
      m.spec_ = KnnSpec{p.at("k").get<int>()};
      m.mean_ = doc.at("mean").get<std::vector<double>>();
      m.scale_ = doc.at("scale").get<std::vector<double>>();
      m.points_ = doc.at("points").get<std::vector<std::vector<double>>>();
      m.labels_ = doc.at("labels").get<std::vector<std::vector<std::uint8_t>>>();
      return m;
    }
    if (kind == "dt") {
      m.kind_ = Kind::DecisionTree;
      m.spec_ = TreeSpec{p.at("max_depth").get<int>(), p.at("min_leaf").get<int>()};
    } else if (kind == "rf") {
      m.kind_ = Kind::RandomForest;
      m.spec_ = ForestSpec{p.at("n_trees").get<int>(),          p.at("max_depth").get<int>(),
                           p.at("min_leaf").get<int>(),         p.at("feature_subsample").get<double>(),
                           p.at("bootstrap").get<bool>(),       p.at("seed").get<std::uint64_t>()};
    } else {
      throw FormatError("unknown model kind '" + kind + "'");
    }
    for (const auto& tree : doc.at("trees")) {
      std::vector<DecisionTree> slots;
      for (const auto& t : tree) slots.push_back(tree_from_json(t));
      if (static_cast<int>(slots.size()) != m.slots_) throw FormatError("tree count does not match slots");
      m.forest_.push_back(std::move(slots));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed model document: ") + e.what());
  }
  return m;
}

void save_model(const MultiLabelModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << model.to_json().dump() << '\n';
}

MultiLabelModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  try {
    return MultiLabelModel::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

double f_score(const std::vector<std::vector<std::uint8_t>>& predictions,
               const std::vector<std::vector<std::uint8_t>>& truths, FAverage average, int num_classes) {
  if (predictions.size() != truths.size()) {
    throw std::invalid_argument("f_score: " + std::to_string(predictions.size()) + " predictions vs " +
                                std::to_string(truths.size()) + " truths");
  }
  std::vector<long> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  long slots = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (predictions[i].size() != truths[i].size()) throw std::invalid_argument("f_score: slot count mismatch");
    for (std::size_t s = 0; s < truths[i].size(); ++s) {
      const int p = predictions[i][s], t = truths[i][s];
      if (p >= num_classes || t >= num_classes) throw std::invalid_argument("f_score: level beyond class count");
      ++slots;
      if (p == t) {
        ++tp[t];
      } else {
        ++fp[p];
        ++fn[t];
      }
    }
  }
  if (slots == 0) return 1.0;
  if (average == FAverage::Micro) {
    const double TP = std::accumulate(tp.begin(), tp.end(), 0.0);
    const double FP = std::accumulate(fp.begin(), fp.end(), 0.0);
    const double FN = std::accumulate(fn.begin(), fn.end(), 0.0);
    return 2.0 * TP / (2.0 * TP + FP + FN);
  }
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < num_classes; ++c) {
    const long denom = 2 * tp[c] + fp[c] + fn[c];
    if (denom == 0) continue;
    ++present;
    sum += 2.0 * tp[c] / denom;
  }
  return sum / present;
}

ScoreInterval f_score_interval(const std::vector<std::vector<std::uint8_t>>& predictions,
                               const std::vector<std::vector<std::uint8_t>>& truths, FAverage average,
                               int num_classes, const BootstrapOptions& options) {
  const double point = f_score(predictions, truths, average, num_classes);
  if (!(options.confidence > 0.0 && options.confidence < 1.0) || options.resamples < 1) {
    throw std::invalid_argument("f_score_interval: confidence must be in (0,1) and resamples >= 1");
  }
  if (truths.empty()) return {point, point};
  Rng rng(options.seed);
  std::vector<double> scores(options.resamples);
  std::vector<std::vector<std::uint8_t>> p(truths.size()), t(truths.size());
  for (auto& score : scores) {
    for (std::size_t i = 0; i < truths.size(); ++i) {
      const auto j = rng.below(truths.size());
      p[i] = predictions[j];
      t[i] = truths[j];
    }
    score = f_score(p, t, average, num_classes);
  }
  std::sort(scores.begin(), scores.end());
  const double tail = (1.0 - options.confidence) / 2.0;
  const auto pick = [&](double q) {
    const auto k = static_cast<std::size_t>(std::floor(q * (scores.size() - 1) + 0.5));
    return scores[std::min(k, scores.size() - 1)];
  };
  return {pick(tail), pick(1.0 - tail)};
}

}  // namespace cfc
