#include <benchmark/benchmark.h>

#include "cfc/baselines.hpp"
#include "cfc/cost_model.hpp"
#include "cfc/mobility.hpp"
#include "cfc/optimizer.hpp"
#include "cfc/replay.hpp"
#include "cfc/scenario.hpp"

namespace {

using namespace cfc;

ContactTrace desk_trace(double rate, std::uint64_t seed = 1) {
  Scenario scn = desk_scenario();
  scn.mobility.arrival_rate = rate;
  scn.mobility.rng_seed = seed;
  return simulate_mobility(scn.grid(), scn.mobility);
}

void BM_Simulate(benchmark::State& state) {
  const Scenario scn = desk_scenario();
  MobilityConfig cfg = scn.mobility;
  cfg.arrival_rate = static_cast<double>(state.range(0)) / 100.0;
  const RoadGrid grid = scn.grid();
  std::size_t contacts = 0;
  for (auto _ : state) {
    const ContactTrace tr = simulate_mobility(grid, cfg);
    contacts = tr.contacts.size();
    benchmark::DoNotOptimize(contacts);
  }
  state.counters["contacts"] = static_cast<double>(contacts);
}
BENCHMARK(BM_Simulate)->Arg(5)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_ReplayRun(benchmark::State& state) {
  const Scenario scn = desk_scenario();
  const ContactTrace tr = desk_trace(static_cast<double>(state.range(0)) / 100.0);
  const ReplayEngine eng(tr, scn.grid(), scn.replay);
  const StrategyMatrix s = all_on(eng.num_links(), eng.num_intervals());
  for (auto _ : state) benchmark::DoNotOptimize(eng.run(s, 1, 1));
  state.counters["nodes"] = tr.num_nodes;
}
BENCHMARK(BM_ReplayRun)->Arg(5)->Arg(20)->Unit(benchmark::kMicrosecond);

void BM_GreedySearch(benchmark::State& state) {
  const Scenario scn = desk_scenario();
  const ContactTrace tr = desk_trace(0.05);
  const ReplayEngine eng(tr, scn.grid(), scn.replay);
  SearchConfig search = scn.search;
  search.max_oracle_calls = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(optimize(eng, scn.cost, search));
}
BENCHMARK(BM_GreedySearch)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_KnnPredict(benchmark::State& state) {
  TrainingSet ts;
  Rng rng(3);
  for (int i = 0; i < state.range(0); ++i) {
    std::vector<double> x(62);
    for (double& v : x) v = rng.uniform();
    ts.inputs.push_back(std::move(x));
    ts.labels.push_back(std::vector<std::uint8_t>(62, static_cast<std::uint8_t>(rng.below(11))));
  }
  const MultiLabelModel m = MultiLabelModel::train(KnnSpec{}, ts);
  for (auto _ : state) benchmark::DoNotOptimize(m.predict(ts.inputs[0]));
}
BENCHMARK(BM_KnnPredict)->Arg(1000)->Arg(10000)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
