#include <gtest/gtest.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "cfc/cost_model.hpp"
#include "cfc/dataset.hpp"
#include "cfc/errors.hpp"
#include "cfc/scenario.hpp"
#include "fixtures.hpp"

namespace cfc {
namespace {

struct Built {
  DatasetBuild build;
  std::vector<StrategyMatrix> sampled;  // by couple
};

// Uniform lattice strategies, remembered in couple order (jobs = 1 keeps
// the sampler calls sequential).
Built lattice_dataset(std::size_t n, std::uint64_t seed, int traces = 2, LabelMode mode = LabelMode::Sampled) {
  const Scenario scn = desk_scenario();
  auto sampled = std::make_shared<std::vector<StrategyMatrix>>();
  StrategySampler sampler = StrategySampler::of(StrategySampler::Kind::Custom);
  sampler.custom = [sampled](const ReplayEngine& eng, int, Rng& rng) {
    StrategyMatrix s(eng.num_links(), eng.num_intervals());
    for (LinkId l = 0; l < eng.num_links(); ++l) {
      s.set_level(Param::Infectivity, l, 0, static_cast<int>(rng.below(11)));
      s.set_level(Param::Keep, l, 0, 6 + static_cast<int>(rng.below(5)));
    }
    sampled->push_back(s);
    return s;
  };
  MobilityConfig mob = scn.mobility;
  mob.rng_seed = seed;
  DatasetOptions opts;
  opts.seed = seed;
  opts.traces_per_config = traces;
  opts.label_mode = mode;
  Built out{build_dataset(scn.grid(), {mob}, scn.replay, scn.cost, sampler, n, opts), {}};
  out.sampled = *sampled;
  return out;
}

bool all_zero_labels(const DatasetRecord& r) {
  for (auto v : r.a_levels) {
    if (v) return false;
  }
  for (auto v : r.b_levels) {
    if (v) return false;
  }
  return true;
}

TEST(Dataset, ZeroRecordsStillDescribeTheScenario) {
  const Scenario scn = desk_scenario();
  const DatasetBuild b = build_dataset(scn.grid(), {scn.mobility}, scn.replay, scn.cost, StrategySampler::mixed(), 0);
  EXPECT_TRUE(b.dataset.records.empty());
  EXPECT_EQ(b.dataset.header.num_links, 31);
  EXPECT_EQ(b.dataset.header.traces.size(), 1u);
  std::stringstream ss;
  write_dataset(ss, b.dataset);
  EXPECT_EQ(read_dataset(ss), b.dataset);
}

TEST(Dataset, AllOffSamplerIsNeverFeasible) {
  const Scenario scn = desk_scenario();
  const DatasetBuild b = build_dataset(scn.grid(), {scn.mobility}, scn.replay, scn.cost,
                                       StrategySampler::of(StrategySampler::Kind::AllOff), 6);
  ASSERT_EQ(b.dataset.records.size(), 6u);
  for (const auto& r : b.dataset.records) {
    EXPECT_FALSE(r.feasible);
    EXPECT_TRUE(all_zero_labels(r));
    EXPECT_EQ(r.features.size(), 31u * kNumFeatures);
    if (r.min_alpha) EXPECT_EQ(*r.min_alpha, 0.0);
  }
}

TEST(Dataset, InfeasibleRecordsCarryAllOffLabels) {
  const Scenario scn = desk_scenario();
  const Built built = lattice_dataset(200, 5);
  const Dataset& ds = built.build.dataset;
  ASSERT_EQ(ds.records.size(), 200u);
  ASSERT_EQ(built.sampled.size(), 200u);
  int feasible = 0;
  for (const auto& r : ds.records) {
    const StrategyMatrix& s = built.sampled[r.couple];
    EvaluationResult check =
        ReplayEngine(built.build.traces[r.trace], scn.grid(), scn.replay).run(s, r.replay_seed, scn.replay.monte_carlo_runs);
    score(check, scn.replay.intervals, scn.cost);
    ASSERT_EQ(check.feasible, r.feasible) << "record " << r.id;
    EXPECT_DOUBLE_EQ(check.cost, r.cost);
    if (r.feasible) {
      ++feasible;
      EXPECT_EQ(couple_strategy(ds, r.couple), s);
    } else {
      EXPECT_TRUE(all_zero_labels(r)) << "record " << r.id;
    }
  }
  EXPECT_GT(feasible, 0);
  EXPECT_LT(feasible, 200);
  EXPECT_TRUE(audit_labels(ds, built.build.traces).empty());
}

TEST(Dataset, CheapestFeasibleLabels) {
  const Built built = lattice_dataset(60, 8, 2, LabelMode::CheapestFeasible);
  const Dataset& ds = built.build.dataset;
  std::map<int, double> cheapest;
  for (const auto& r : ds.records) {
    if (!r.feasible) continue;
    auto [it, fresh] = cheapest.emplace(r.trace, r.cost);
    EXPECT_EQ(it->second, r.cost) << "every feasible record of a trace shares the cheapest label";
  }
  EXPECT_FALSE(cheapest.empty());
}

TEST(Dataset, DeterministicAndRoundTrips) {
  const Scenario scn = desk_scenario();
  DatasetOptions opts;
  opts.seed = 3;
  opts.traces_per_config = 2;
  StrategySampler sampler = StrategySampler::of(StrategySampler::Kind::UniformLattice);
  auto make = [&](int jobs) {
    DatasetOptions o = opts;
    o.jobs = jobs;
    return build_dataset(scn.grid(), {scn.mobility}, scn.replay, scn.cost, sampler, 20, o).dataset;
  };
  const Dataset a = make(1);
  std::stringstream sa, sb;
  write_dataset(sa, a);
  write_dataset(sb, make(3));
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(read_dataset(sa), a);

  test::TempDir dir("dataset");
  save_dataset(a, dir / "d.ndjson");
  const Dataset back = load_dataset(dir / "d.ndjson");
  EXPECT_EQ(back, a);
  const ContactTrace tr = resolve_trace(back.header, 1, dir.path());
  EXPECT_EQ(serialize_trace(tr), serialize_trace(simulate_mobility(scn.grid(), back.header.traces[1].mobility)));
}

TEST(Dataset, CsvAndInspect) {
  const Dataset ds = lattice_dataset(10, 2, 1).build.dataset;
  std::ostringstream csv;
  write_dataset_csv(csv, ds);
  std::istringstream lines(csv.str());
  std::string header;
  std::getline(lines, header);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), 4 + 31 * kNumFeatures + 62);
  EXPECT_EQ(header.rfind("record_id,couple,trace,interval,feasible,f0_mean_speed", 0), 0u);
  int rows = 0;
  for (std::string l; std::getline(lines, l);) ++rows;
  EXPECT_EQ(rows, 10);
  const nlohmann::json info = inspect_dataset(ds);
  EXPECT_EQ(info["records"], 10);
  EXPECT_EQ(info["couples"], 10);
  EXPECT_EQ(info["a_level_histogram"].size(), 11u);
}

TEST(Dataset, InferenceColumnsAreMobilityOnly) {
  DatasetHeader h;
  h.num_links = 3;
  const std::vector<int> cols = h.inference_columns();
  EXPECT_EQ(cols, (std::vector<int>{0, 1, 6, 7, 12, 13}));
  DatasetRecord r;
  r.features.resize(18);
  for (int i = 0; i < 18; ++i) r.features[i] = i;
  EXPECT_EQ(mobility_inputs(r), (std::vector<double>{0, 1, 6, 7, 12, 13}));
}

TEST(Dataset, KFoldSplit) {
  const auto folds = kfold_split(10, 3, 4);
  ASSERT_EQ(folds.size(), 3u);
  EXPECT_EQ(folds[0].validation.size(), 4u);
  EXPECT_EQ(folds[1].validation.size(), 3u);
  EXPECT_EQ(folds[2].validation.size(), 3u);
  std::vector<int> hits(10, 0);
  for (const auto& f : folds) {
    EXPECT_EQ(f.train.size() + f.validation.size(), 10u);
    for (auto i : f.validation) ++hits[i];
  }
  EXPECT_EQ(hits, std::vector<int>(10, 1));
  EXPECT_EQ(kfold_split(10, 3, 4)[1].validation, folds[1].validation);
  EXPECT_THROW(kfold_split(10, 1, 4), std::invalid_argument);
  EXPECT_THROW(kfold_split(2, 3, 4), std::invalid_argument);
}

TEST(Dataset, RejectsMalformedFiles) {
  const Dataset ds = lattice_dataset(4, 1, 1).build.dataset;
  std::stringstream ss;
  write_dataset(ss, ds);
  const std::string text = ss.str();
  auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return read_dataset(in);
  };
  EXPECT_THROW(parse(""), FormatError);
  EXPECT_THROW(parse("{not json\n"), FormatError);
  const std::size_t first_nl = text.find('\n');
  nlohmann::json rec = nlohmann::json::parse(text.substr(first_nl + 1, text.find('\n', first_nl + 1) - first_nl - 1));
  rec["a_levels"].push_back(0);
  EXPECT_THROW(parse(text.substr(0, first_nl + 1) + rec.dump() + "\n"), FormatError);
  rec["a_levels"].erase(rec["a_levels"].size() - 1);
  rec["b_levels"][0] = 11;
  EXPECT_THROW(parse(text.substr(0, first_nl + 1) + rec.dump() + "\n"), FormatError);
  nlohmann::json header = nlohmann::json::parse(text.substr(0, first_nl));
  header["schema_version"] = 99;
  EXPECT_THROW(parse(header.dump() + "\n"), FormatError);
  EXPECT_THROW(couple_strategy(ds, 1234), std::invalid_argument);
}

}  // namespace
}  // namespace cfc
