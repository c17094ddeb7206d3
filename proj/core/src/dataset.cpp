#include "cfc/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

#include "cfc/errors.hpp"
#include "cfc/parallel.hpp"

namespace cfc {
namespace {

enum SeedTag : std::uint64_t { kTraceTag = 0x54524143, kKindTag = 0x4b494e44, kSampleTag = 0x53414d50,
                               kReplayTag = 0x52504c59, kSearchTag = 0x53524348 };

struct Couple {
  int trace = 0;
  StrategyMatrix strategy;
  EvaluationResult result;
  std::uint64_t replay_seed = 0;
};

StrategyMatrix uniform_lattice(int links, int intervals, int q, Rng& rng) {
  StrategyMatrix s(links, intervals, q);
  for (int p = 0; p < 2; ++p) {
    for (LinkId l = 0; l < links; ++l) {
      for (int t = 0; t < intervals; ++t) {
        s.set_level(static_cast<Param>(p), l, t, static_cast<int>(rng.below(static_cast<std::uint64_t>(q))));
      }
    }
  }
  return s;
}

StrategyMatrix perturb(const StrategyMatrix& base, int entries, Rng& rng) {
  std::vector<std::uint8_t> lv = base.levels();
  const int max_level = base.max_level();
  for (int i = 0; i < entries && !lv.empty(); ++i) {
    const std::size_t pos = rng.below(lv.size());
    const int step = rng.bernoulli(0.5) ? 1 : -1;
    lv[pos] = static_cast<std::uint8_t>(std::clamp(lv[pos] + step, 0, max_level));
  }
  return StrategyMatrix::from_levels(base.num_links(), base.num_intervals(), base.quantization_levels(), lv);
}

std::optional<double> min_defined(const std::vector<std::optional<double>>& alpha) {
  std::optional<double> m;
  for (const auto& a : alpha) {
    if (a && (!m || *a < *m)) m = *a;
  }
  return m;
}

nlohmann::json layout_to_json(const GridLayout& g) {
  nlohmann::json cells = nlohmann::json::array();
  for (auto [r, c] : g.cell_of_link) cells.push_back({r, c});
  return {{"rows", g.rows}, {"cols", g.cols}, {"cell_of_link", std::move(cells)}};
}

GridLayout layout_from_json(const nlohmann::json& doc) {
  GridLayout g;
  g.rows = doc.at("rows").get<int>();
  g.cols = doc.at("cols").get<int>();
  for (const auto& c : doc.at("cell_of_link")) g.cell_of_link.emplace_back(c.at(0).get<int>(), c.at(1).get<int>());
  return g;
}

std::vector<std::uint8_t> level_vector(const nlohmann::json& v, int q) {
  std::vector<std::uint8_t> out;
  for (const auto& x : v) {
    const int level = x.get<int>();
    if (level < 0 || level >= q) throw FormatError("label level " + std::to_string(level) + " outside [0, " +
                                                   std::to_string(q - 1) + "]");
    out.push_back(static_cast<std::uint8_t>(level));
  }
  return out;
}

}  // namespace

std::vector<int> DatasetHeader::inference_columns() const {
  std::vector<int> cols;
  for (int l = 0; l < num_links; ++l) {
    for (int f = 0; f < kNumMobilityFeatures; ++f) cols.push_back(l * kNumFeatures + f);
  }
  return cols;
}

std::vector<double> mobility_inputs(const DatasetRecord& record) {
  std::vector<double> out;
  const std::size_t links = record.features.size() / kNumFeatures;
  out.reserve(links * kNumMobilityFeatures);
  for (std::size_t l = 0; l < links; ++l) {
    for (int f = 0; f < kNumMobilityFeatures; ++f) out.push_back(record.features[l * kNumFeatures + f]);
  }
  return out;
}

DatasetBuild build_dataset(const RoadGrid& grid, const std::vector<MobilityConfig>& mobility_cfgs,
                           const ReplayConfig& replay_cfg, const CostConfig& cost_cfg,
                           const StrategySampler& sampler, std::size_t n_records, const DatasetOptions& options) {
  replay_cfg.validate();
  cost_cfg.validate();
  if (mobility_cfgs.empty()) throw std::invalid_argument("build_dataset needs at least one mobility config");
  if (options.traces_per_config < 1) throw std::invalid_argument("traces_per_config must be >= 1");
  if (sampler.kind == StrategySampler::Kind::Custom && !sampler.custom) {
    throw std::invalid_argument("custom sampler without a function");
  }

  const int L = static_cast<int>(grid.size());
  const int T = static_cast<int>(replay_cfg.intervals.size());
  const int q = sampler.search.quantization_levels;

  DatasetBuild out;
  DatasetHeader& h = out.dataset.header;
  h.num_links = L;
  h.num_intervals = T;
  h.quantization_levels = q;
  h.alpha_target = cost_cfg.alpha_target;
  h.durations = replay_cfg.intervals;
  h.layout = grid.layout();
  h.grid = grid_to_json(grid);
  h.replay = {{"replay", to_json(replay_cfg)}, {"cost", to_json(cost_cfg)}};

  const std::size_t n_traces = mobility_cfgs.size() * static_cast<std::size_t>(options.traces_per_config);
  for (std::size_t i = 0; i < n_traces; ++i) {
    MobilityConfig cfg = mobility_cfgs[i % mobility_cfgs.size()];
    if (options.traces_per_config > 1) cfg.rng_seed = derive_seed(cfg.rng_seed, kTraceTag, i / mobility_cfgs.size());
    h.traces.push_back({static_cast<int>(i), "", cfg});
  }
  if (n_records == 0) return out;

  out.traces.resize(n_traces);
  parallel_for(n_traces, options.jobs,
               [&](std::size_t i) { out.traces[i] = simulate_mobility(grid, h.traces[i].mobility); });
  std::vector<std::optional<ReplayEngine>> engines(n_traces);
  for (std::size_t i = 0; i < n_traces; ++i) engines[i].emplace(out.traces[i], grid, replay_cfg);

  const std::size_t n_couples = (n_records + T - 1) / T;
  auto trace_of = [&](std::size_t c) { return static_cast<int>(c % n_traces); };
  auto wants_optimum = [&](std::size_t c) {
    switch (sampler.kind) {
      case StrategySampler::Kind::OptimizerDerived: return true;
      case StrategySampler::Kind::Mixed:
        return to_unit(derive_seed(options.seed, kKindTag, c)) < sampler.optimizer_fraction;
      default: return false;
    }
  };

  std::vector<char> need(n_traces, 0);
  for (std::size_t c = 0; c < n_couples; ++c) {
    if (wants_optimum(c)) need[trace_of(c)] = 1;
  }
  std::vector<std::optional<StrategyMatrix>> optimum(n_traces);
  parallel_for(n_traces, options.jobs, [&](std::size_t i) {
    if (!need[i]) return;
    SearchConfig search = sampler.search;
    search.rng_seed = derive_seed(search.rng_seed, kSearchTag, i);
    search.jobs = 1;
    try {
      optimum[i] = optimize(*engines[i], cost_cfg, search).strategy;
    } catch (const NoFeasibleSolution&) {
      // Falls back to lattice sampling for this trace.
    }
  });

  std::vector<Couple> couples(n_couples);
  parallel_for(n_couples, options.jobs, [&](std::size_t c) {
    Couple& cp = couples[c];
    cp.trace = trace_of(c);
    const ReplayEngine& engine = *engines[cp.trace];
    Rng rng(derive_seed(options.seed, kSampleTag, c));
    switch (sampler.kind) {
      case StrategySampler::Kind::AllOff: cp.strategy = all_off(L, T, q); break;
      case StrategySampler::Kind::AllOn: cp.strategy = all_on(L, T, AllOnVariant::MaxRetention, q); break;
      case StrategySampler::Kind::Custom: cp.strategy = sampler.custom(engine, cp.trace, rng); break;
      case StrategySampler::Kind::UniformLattice: cp.strategy = uniform_lattice(L, T, q, rng); break;
      case StrategySampler::Kind::OptimizerDerived:
      case StrategySampler::Kind::Mixed:
        if (wants_optimum(c) && optimum[cp.trace]) {
          cp.strategy = perturb(*optimum[cp.trace], sampler.perturb_entries, rng);
        } else {
          cp.strategy = uniform_lattice(L, T, q, rng);
        }
        break;
    }
    if (cp.strategy.num_links() != L || cp.strategy.num_intervals() != T) {
      throw std::invalid_argument("sampler produced a strategy of the wrong shape");
    }
    cp.replay_seed = derive_seed(options.seed, kReplayTag, c);
    cp.result = engine.run(cp.strategy, cp.replay_seed, replay_cfg.monte_carlo_runs);
    score(cp.result, engine.durations(), cost_cfg);
  });

  // Label source per couple: itself, or the cheapest feasible couple on its trace.
  std::vector<std::size_t> source(n_couples);
  for (std::size_t c = 0; c < n_couples; ++c) source[c] = c;
  if (options.label_mode == LabelMode::CheapestFeasible) {
    std::vector<std::size_t> cheapest(n_traces, n_couples);
    for (std::size_t c = 0; c < n_couples; ++c) {
      if (!couples[c].result.feasible) continue;
      std::size_t& best = cheapest[couples[c].trace];
      if (best == n_couples || couples[c].result.cost < couples[best].result.cost) best = c;
    }
    for (std::size_t c = 0; c < n_couples; ++c) {
      if (couples[c].result.feasible) source[c] = cheapest[couples[c].trace];
    }
  }

  out.dataset.records.reserve(n_records);
  for (std::size_t c = 0; c < n_couples; ++c) {
    const Couple& cp = couples[c];
    const Couple& label = couples[source[c]];
    const MobilityConfig& mob = h.traces[cp.trace].mobility;
    for (int t = 0; t < T && out.dataset.records.size() < n_records; ++t) {
      DatasetRecord r;
      r.id = static_cast<std::int64_t>(out.dataset.records.size());
      r.couple = static_cast<std::int64_t>(c);
      r.trace = cp.trace;
      r.interval = t;
      r.features = cp.result.features.interval_row(t);
      r.feasible = cp.result.feasible;
      r.a_levels.assign(L, 0);
      r.b_levels.assign(L, 0);
      if (r.feasible) {
        for (LinkId l = 0; l < L; ++l) {
          r.a_levels[l] = static_cast<std::uint8_t>(label.strategy.level(Param::Infectivity, l, t));
          r.b_levels[l] = static_cast<std::uint8_t>(label.strategy.level(Param::Keep, l, t));
        }
      }
      r.min_alpha = min_defined(label.result.success_ratios);
      r.cost = label.result.cost;
      r.replay_seed = label.replay_seed;
      r.meta = {mob.tx_radius, mob.speed.describe(), mob.rng_seed};
      out.dataset.records.push_back(std::move(r));
    }
  }
  return out;
}

StrategyMatrix couple_strategy(const Dataset& dataset, std::int64_t couple) {
  const DatasetHeader& h = dataset.header;
  StrategyMatrix s(h.num_links, h.num_intervals, h.quantization_levels);
  bool found = false;
  for (const auto& r : dataset.records) {
    if (r.couple != couple) continue;
    found = true;
    for (LinkId l = 0; l < h.num_links; ++l) {
      s.set_level(Param::Infectivity, l, r.interval, r.a_levels[l]);
      s.set_level(Param::Keep, l, r.interval, r.b_levels[l]);
    }
  }
  if (!found) throw std::invalid_argument("no record belongs to couple " + std::to_string(couple));
  return s;
}

std::vector<Fold> kfold_split(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("k-fold needs k >= 2");
  if (static_cast<std::size_t>(k) > n) {
    throw std::invalid_argument("k = " + std::to_string(k) + " exceeds the " + std::to_string(n) + " records");
  }
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);

  std::vector<Fold> folds(k);
  const std::size_t base = n / k, extra = n % k;
  std::size_t pos = 0;
  std::vector<int> fold_of(n);
  for (int f = 0; f < k; ++f) {
    const std::size_t size = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
    for (std::size_t j = 0; j < size; ++j) fold_of[idx[pos++]] = f;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (int f = 0; f < k; ++f) (fold_of[i] == f ? folds[f].validation : folds[f].train).push_back(i);
  }
  return folds;
}

nlohmann::json to_json(const DatasetHeader& h) {
  nlohmann::json traces = nlohmann::json::array();
  for (const auto& t : h.traces) traces.push_back({{"index", t.index}, {"file", t.file}, {"mobility", to_json(t.mobility)}});
  std::vector<std::string> pm, pc;
  for (int f = 0; f < kNumFeatures; ++f) {
    (is_mobility_feature(static_cast<Feature>(f)) ? pm : pc).emplace_back(kFeatureNames[f]);
  }
  return {{"schema_version", h.schema_version},
          {"feature_order", kFeatureNames},
          {"mobility_features", pm},
          {"communication_features", pc},
          {"inference_columns", h.inference_columns()},
          {"num_links", h.num_links},
          {"num_intervals", h.num_intervals},
          {"quantization_levels", h.quantization_levels},
          {"alpha_target", h.alpha_target},
          {"durations", h.durations},
          {"grid_layout", layout_to_json(h.layout)},
          {"grid", h.grid},
          {"replay", h.replay},
          {"traces", std::move(traces)}};
}

DatasetHeader dataset_header_from_json(const nlohmann::json& doc) {
  DatasetHeader h;
  try {
    h.schema_version = doc.at("schema_version").get<int>();
    if (h.schema_version != kDatasetSchemaVersion) {
      throw FormatError("unsupported dataset schema version " + std::to_string(h.schema_version));
    }
    const auto order = doc.at("feature_order").get<std::vector<std::string>>();
    if (order.size() != kFeatureNames.size() || !std::equal(order.begin(), order.end(), kFeatureNames.begin())) {
      throw FormatError("dataset feature order differs from the one this build uses");
    }
    h.num_links = doc.at("num_links").get<int>();
    h.num_intervals = doc.at("num_intervals").get<int>();
    h.quantization_levels = doc.at("quantization_levels").get<int>();
    h.alpha_target = doc.at("alpha_target").get<double>();
    h.durations = doc.at("durations").get<std::vector<double>>();
    h.layout = layout_from_json(doc.at("grid_layout"));
    h.grid = doc.value("grid", nlohmann::json());
    h.replay = doc.value("replay", nlohmann::json());
    for (const auto& t : doc.at("traces")) {
      h.traces.push_back({t.at("index").get<int>(), t.value("file", std::string()),
                          mobility_config_from_json(t.at("mobility"))});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed dataset header: ") + e.what());
  }
  return h;
}

nlohmann::json to_json(const DatasetRecord& r) {
  return {{"record_id", r.id},
          {"couple", r.couple},
          {"trace", r.trace},
          {"interval", r.interval},
          {"features", r.features},
          {"a_levels", r.a_levels},
          {"b_levels", r.b_levels},
          {"feasible", r.feasible},
          {"min_alpha", r.min_alpha ? nlohmann::json(*r.min_alpha) : nlohmann::json(nullptr)},
          {"cost", r.cost},
          {"replay_seed", r.replay_seed},
          {"scenario_meta", {{"tx_radius", r.meta.tx_radius}, {"speed_model", r.meta.speed_model}, {"seed", r.meta.seed}}}};
}

DatasetRecord dataset_record_from_json(const nlohmann::json& doc) {
  DatasetRecord r;
  try {
    r.id = doc.at("record_id").get<std::int64_t>();
    r.couple = doc.at("couple").get<std::int64_t>();
    r.trace = doc.at("trace").get<int>();
    r.interval = doc.at("interval").get<int>();
    r.features = doc.at("features").get<std::vector<double>>();
    r.a_levels = level_vector(doc.at("a_levels"), std::numeric_limits<int>::max());
    r.b_levels = level_vector(doc.at("b_levels"), std::numeric_limits<int>::max());
    r.feasible = doc.at("feasible").get<bool>();
    if (const auto& m = doc.at("min_alpha"); !m.is_null()) r.min_alpha = m.get<double>();
    r.cost = doc.at("cost").get<double>();
    r.replay_seed = doc.at("replay_seed").get<std::uint64_t>();
    const auto& meta = doc.at("scenario_meta");
    r.meta = {meta.at("tx_radius").get<double>(), meta.at("speed_model").get<std::string>(),
              meta.at("seed").get<std::uint64_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed dataset record: ") + e.what());
  }
  return r;
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
  out << to_json(dataset.header).dump() << '\n';
  for (const auto& r : dataset.records) out << to_json(r).dump() << '\n';
}

Dataset read_dataset(std::istream& in) {
  Dataset ds;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty dataset file");
  try {
    ds.header = dataset_header_from_json(nlohmann::json::parse(line));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("dataset header is not JSON: ") + e.what());
  }
  const DatasetHeader& h = ds.header;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    DatasetRecord r = dataset_record_from_json(doc);
    const auto L = static_cast<std::size_t>(h.num_links);
    if (r.features.size() != L * kNumFeatures || r.a_levels.size() != L || r.b_levels.size() != L) {
      throw FormatError("dataset line " + std::to_string(line_no) + ": record dimensions do not match the header");
    }
    for (std::size_t l = 0; l < L; ++l) {
      if (r.a_levels[l] >= h.quantization_levels || r.b_levels[l] >= h.quantization_levels) {
        throw FormatError("dataset line " + std::to_string(line_no) + ": label level beyond the lattice");
      }
    }
    if (r.interval < 0 || r.interval >= h.num_intervals || r.trace < 0 ||
        r.trace >= static_cast<int>(h.traces.size())) {
      throw FormatError("dataset line " + std::to_string(line_no) + ": interval or trace index out of range");
    }
    ds.records.push_back(std::move(r));
  }
  return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_dataset(out, dataset);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_dataset(in);
}

void write_dataset_csv(std::ostream& out, const Dataset& dataset) {
  const int L = dataset.header.num_links;
  out << "record_id,couple,trace,interval,feasible";
  for (int l = 0; l < L; ++l) {
    for (auto name : kFeatureNames) out << ",f" << l << '_' << name;
  }
  for (int l = 0; l < L; ++l) out << ",l" << l << "_a,l" << l << "_b";
  out << '\n';
  out.precision(17);
  for (const auto& r : dataset.records) {
    out << r.id << ',' << r.couple << ',' << r.trace << ',' << r.interval << ',' << (r.feasible ? 1 : 0);
    for (double v : r.features) out << ',' << v;
    for (int l = 0; l < L; ++l) out << ',' << int{r.a_levels[l]} << ',' << int{r.b_levels[l]};
    out << '\n';
  }
}

nlohmann::json inspect_dataset(const Dataset& dataset) {
  const DatasetHeader& h = dataset.header;
  std::size_t feasible = 0;
  std::vector<std::size_t> a_hist(h.quantization_levels, 0), b_hist(h.quantization_levels, 0);
  std::map<std::int64_t, int> couples;
  for (const auto& r : dataset.records) {
    feasible += r.feasible ? 1 : 0;
    ++couples[r.couple];
    for (auto v : r.a_levels) ++a_hist[v];
    for (auto v : r.b_levels) ++b_hist[v];
  }
  const double n = static_cast<double>(dataset.records.size());
  return {{"records", dataset.records.size()},
          {"couples", couples.size()},
          {"traces", h.traces.size()},
          {"num_links", h.num_links},
          {"num_intervals", h.num_intervals},
          {"feasible_fraction", n > 0 ? feasible / n : 0.0},
          {"a_level_histogram", a_hist},
          {"b_level_histogram", b_hist}};
}

ContactTrace resolve_trace(const DatasetHeader& header, int index, const std::filesystem::path& base_dir) {
  if (index < 0 || index >= static_cast<int>(header.traces.size())) {
    throw std::invalid_argument("trace index " + std::to_string(index) + " out of range");
  }
  const TraceRef& ref = header.traces[index];
  if (!ref.file.empty()) return load_trace(base_dir / ref.file);
  if (header.grid.is_null()) throw FormatError("dataset header carries neither a trace file nor the grid");
  return simulate_mobility(grid_from_json(header.grid), ref.mobility);
}

std::vector<std::int64_t> audit_labels(const Dataset& dataset, const std::vector<ContactTrace>& traces,
                                       std::size_t stride) {
  const DatasetHeader& h = dataset.header;
  if (h.grid.is_null() || h.replay.is_null()) throw FormatError("dataset header lacks grid or replay settings");
  if (traces.size() != h.traces.size()) throw std::invalid_argument("audit needs every trace of the dataset");
  const RoadGrid grid = grid_from_json(h.grid);
  const ReplayConfig replay = replay_config_from_json(h.replay.at("replay"));
  const CostConfig cost = cost_config_from_json(h.replay.at("cost"));

  std::map<std::int64_t, const DatasetRecord*> first;
  std::map<std::int64_t, int> count;
  for (const auto& r : dataset.records) {
    first.emplace(r.couple, &r);
    ++count[r.couple];
  }
  std::vector<std::int64_t> bad;
  std::size_t seen = 0;
  std::map<int, std::optional<ReplayEngine>> engines;
  for (const auto& [couple, rec] : first) {
    if (count[couple] != h.num_intervals) continue;  // truncated last couple
    const StrategyMatrix s = couple_strategy(dataset, couple);
    if (s.all_zero()) continue;
    if (seen++ % std::max<std::size_t>(stride, 1) != 0) continue;
    auto& engine = engines[rec->trace];
    if (!engine) engine.emplace(traces[rec->trace], grid, replay);
    EvaluationResult r = engine->run(s, rec->replay_seed, replay.monte_carlo_runs);
    if (is_feasible(r, cost) != rec->feasible) bad.push_back(couple);
  }
  return bad;
}

}  // namespace cfc
