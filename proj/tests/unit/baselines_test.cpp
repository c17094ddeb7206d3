#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "cfc/baselines.hpp"
#include "cfc/errors.hpp"
#include "fixtures.hpp"
#include "synthetic.hpp"

namespace cfc {
namespace {

using Labels = std::vector<std::vector<std::uint8_t>>;

Labels predict_all(const MultiLabelModel& m, const TrainingSet& ts) { return m.predict(ts.inputs); }

TEST(FScore, HandComputedFixture) {
  const Labels truth = {{0}, {0}, {1}, {2}};
  const Labels pred = {{0}, {1}, {1}, {1}};
  EXPECT_DOUBLE_EQ(f_score(pred, truth, FAverage::Micro), 0.5);
  // class 0: 2/3, class 1: 1/2, class 2: 0
  EXPECT_NEAR(f_score(pred, truth, FAverage::Macro), (2.0 / 3.0 + 0.5) / 3.0, 1e-12);
}

TEST(FScore, EdgeCases) {
  EXPECT_EQ(f_score({}, {}), 1.0);
  EXPECT_EQ(f_score({{3, 4}}, {{3, 4}}, FAverage::Macro), 1.0);
  EXPECT_EQ(f_score({{1, 1}}, {{0, 0}}), 0.0);
  EXPECT_THROW(f_score({{1}}, {}), std::invalid_argument);
  EXPECT_THROW(f_score({{1}}, {{1, 2}}), std::invalid_argument);
  EXPECT_THROW(f_score({{11}}, {{1}}), std::invalid_argument);
}

TEST(FScore, BootstrapIntervalBracketsThePointEstimate) {
  Labels truth, pred;
  for (int i = 0; i < 60; ++i) {
    truth.push_back({static_cast<std::uint8_t>(i % 3), 1});
    pred.push_back({static_cast<std::uint8_t>(i % 4 == 0 ? 2 : i % 3), 1});
  }
  const double point = f_score(pred, truth);
  const ScoreInterval ci = f_score_interval(pred, truth);
  EXPECT_LE(ci.lo, point);
  EXPECT_GE(ci.hi, point);
  EXPECT_LT(ci.lo, ci.hi);
  const ScoreInterval again = f_score_interval(pred, truth);
  EXPECT_EQ(ci.lo, again.lo);
  EXPECT_EQ(ci.hi, again.hi);
  const ScoreInterval narrow = f_score_interval(pred, truth, FAverage::Micro, kDefaultQuantization, {0.5, 1000, 1});
  EXPECT_GE(narrow.lo, ci.lo);
  EXPECT_LE(narrow.hi, ci.hi);

  const ScoreInterval exact = f_score_interval(truth, truth);
  EXPECT_EQ(exact.lo, 1.0);
  EXPECT_EQ(exact.hi, 1.0);
  EXPECT_THROW(f_score_interval(pred, truth, FAverage::Micro, kDefaultQuantization, {1.0, 10, 1}),
               std::invalid_argument);
}

TEST(Knn, SingleRecordIsAlwaysPredicted) {
  TrainingSet ts;
  ts.inputs = {{1.0, 2.0}};
  ts.labels = {{3, 9, 0}};
  const MultiLabelModel m = MultiLabelModel::train(KnnSpec{5}, ts);
  EXPECT_EQ(m.predict(std::vector<double>{100.0, -4.0}), (std::vector<std::uint8_t>{3, 9, 0}));
  EXPECT_EQ(m.num_slots(), 3);
}

TEST(Knn, InvariantToFeatureScale) {
  const TrainingSet ts = test::threshold_separable(300, 4);
  TrainingSet scaled = ts;
  for (auto& x : scaled.inputs) {
    x[0] *= 10.0;
    x[2] = x[2] * 1e3 + 7.0;
  }
  const TrainingSet train = test::slice(ts, 0, 200), test_rows = test::slice(ts, 200, 300);
  const TrainingSet strain = test::slice(scaled, 0, 200), stest = test::slice(scaled, 200, 300);
  for (int k : {1, 5}) {
    const Labels a = predict_all(MultiLabelModel::train(KnnSpec{k}, train), test_rows);
    const Labels b = predict_all(MultiLabelModel::train(KnnSpec{k}, strain), stest);
    EXPECT_EQ(a, b) << "k = " << k;
  }
}

TEST(DecisionTree, LearnsThresholdRules) {
  const TrainingSet ts = test::threshold_separable(1000, 7);
  const TrainingSet train = test::slice(ts, 0, 800), held = test::slice(ts, 800, 1000);
  const MultiLabelModel m = MultiLabelModel::train(TreeSpec{}, train);
  EXPECT_EQ(f_score(predict_all(m, train), train.labels), 1.0);
  EXPECT_GE(f_score(predict_all(m, held), held.labels), 0.95);
}

TEST(RandomForest, OneFullTreeIsADecisionTree) {
  const TrainingSet ts = test::threshold_separable(400, 9);
  ForestSpec one;
  one.n_trees = 1;
  one.bootstrap = false;
  one.feature_subsample = 1.0;
  const MultiLabelModel rf = MultiLabelModel::train(one, test::slice(ts, 0, 300));
  const MultiLabelModel dt = MultiLabelModel::train(TreeSpec{one.max_depth, one.min_leaf}, test::slice(ts, 0, 300));
  EXPECT_EQ(predict_all(rf, test::slice(ts, 300, 400)), predict_all(dt, test::slice(ts, 300, 400)));
}

TEST(RandomForest, SeededAndParallelSafe) {
  const TrainingSet ts = test::threshold_separable(300, 10);
  ForestSpec spec;
  spec.n_trees = 8;
  spec.feature_subsample = 0.5;
  const MultiLabelModel a = MultiLabelModel::train(spec, ts, 1);
  const MultiLabelModel b = MultiLabelModel::train(spec, ts, 4);
  EXPECT_EQ(a.to_json(), b.to_json());
  EXPECT_GE(f_score(predict_all(a, ts), ts.labels), 0.9);
}

TEST(Models, JsonRoundTrip) {
  const TrainingSet ts = test::threshold_separable(120, 2);
  test::TempDir dir("models");
  for (const ModelSpec& spec : {ModelSpec{KnnSpec{3}}, ModelSpec{TreeSpec{}}, ModelSpec{ForestSpec{}}}) {
    const MultiLabelModel m = MultiLabelModel::train(spec, ts);
    const std::string file = std::string(model_kind_name(m.kind())) + ".json";
    save_model(m, dir / file);
    const MultiLabelModel back = load_model(dir / file);
    EXPECT_EQ(back.kind(), m.kind());
    EXPECT_EQ(predict_all(back, ts), predict_all(m, ts)) << file;
  }
  EXPECT_THROW(MultiLabelModel::from_json({{"format", "x"}, {"version", 1}}), FormatError);
}

TEST(Models, RejectBadTrainingInput) {
  EXPECT_THROW(MultiLabelModel::train(KnnSpec{}, TrainingSet{}), std::invalid_argument);
  TrainingSet ts = test::threshold_separable(10, 1);
  EXPECT_THROW(MultiLabelModel::train(KnnSpec{0}, ts), std::invalid_argument);
  ts.labels[0][0] = 11;
  EXPECT_THROW(MultiLabelModel::train(TreeSpec{}, ts), std::invalid_argument);
  const MultiLabelModel m = MultiLabelModel::train(KnnSpec{}, test::threshold_separable(10, 1));
  EXPECT_THROW(m.predict(std::vector<double>{1.0}), std::invalid_argument);
}

}  // namespace
}  // namespace cfc
