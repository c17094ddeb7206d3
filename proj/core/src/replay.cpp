#include "cfc/replay.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "cfc/errors.hpp"
#include "cfc/rng.hpp"

namespace cfc {
namespace {

constexpr double kTimeTol = 1e-9;

// Coin streams; each random decision is keyed by what it decides so that
// runs under different strategies share their randomness.
enum CoinKind : std::uint64_t { kSeedCoin = 1, kAttemptCoin = 2, kReceiveCoin = 3, kMoveCoin = 4 };

struct Pending {
  double completes_at;
  NodeId sender;
  NodeId receiver;
  std::uint32_t contact;
};

}  // namespace

LinkFeatures::LinkFeatures(int num_links, int num_intervals)
    : links_(num_links), intervals_(num_intervals) {
  for (auto& v : values_) v.assign(static_cast<std::size_t>(num_links) * num_intervals, 0.0);
}

std::vector<double> LinkFeatures::interval_row(int t) const {
  std::vector<double> row;
  row.reserve(static_cast<std::size_t>(links_) * kNumFeatures);
  for (LinkId l = 0; l < links_; ++l) {
    for (int f = 0; f < kNumFeatures; ++f) row.push_back(values_[f][index(l, t)]);
  }
  return row;
}

SnrModel SnrModel::fixed_db(double db) { return fixed(std::pow(10.0, db / 10.0)); }

double SnrModel::at(double meters) const {
  if (kind == Kind::Fixed) return linear;
  return linear * std::pow(std::max(meters, 1.0), -exponent);
}

void ReplayConfig::validate() const {
  if (intervals.empty()) throw std::invalid_argument("replay needs at least one interval");
  for (double d : intervals) {
    if (!(d > 0.0)) throw std::invalid_argument("interval durations must be > 0");
  }
  if (!(content_size > 0.0)) throw std::invalid_argument("content_size must be > 0");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be > 0");
  if (!(snr.linear > 0.0)) throw std::invalid_argument("SNR must be > 0");
  if (monte_carlo_runs < 1) throw std::invalid_argument("monte_carlo_runs must be >= 1");
}

double ReplayConfig::window() const { return std::accumulate(intervals.begin(), intervals.end(), 0.0); }

double ReplayConfig::capacity(double meters) const { return bandwidth * std::log2(1.0 + snr.at(meters)); }

nlohmann::json to_json(const ReplayConfig& cfg) {
  nlohmann::json snr = cfg.snr.kind == SnrModel::Kind::Fixed
                           ? nlohmann::json{{"kind", "fixed"}, {"linear", cfg.snr.linear}}
                           : nlohmann::json{{"kind", "path_loss"}, {"linear_at_1m", cfg.snr.linear},
                                            {"exponent", cfg.snr.exponent}};
  return {{"intervals", cfg.intervals},     {"content_size", cfg.content_size},
          {"bandwidth", cfg.bandwidth},     {"snr", std::move(snr)},
          {"rng_seed", cfg.rng_seed},       {"monte_carlo_runs", cfg.monte_carlo_runs}};
}

ReplayConfig replay_config_from_json(const nlohmann::json& doc) {
  ReplayConfig cfg;
  try {
    if (doc.contains("intervals")) cfg.intervals = doc.at("intervals").get<std::vector<double>>();
    cfg.content_size = doc.value("content_size", cfg.content_size);
    cfg.bandwidth = doc.value("bandwidth", cfg.bandwidth);
    cfg.rng_seed = doc.value("rng_seed", cfg.rng_seed);
    cfg.monte_carlo_runs = doc.value("monte_carlo_runs", cfg.monte_carlo_runs);
    if (doc.contains("snr")) {
      const auto& snr = doc.at("snr");
      const std::string kind = snr.value("kind", std::string("fixed"));
      if (kind == "fixed") {
        cfg.snr = snr.contains("db") ? SnrModel::fixed_db(snr.at("db").get<double>())
                                     : SnrModel::fixed(snr.at("linear").get<double>());
      } else if (kind == "path_loss") {
        cfg.snr = SnrModel::path_loss(snr.at("linear_at_1m").get<double>(), snr.value("exponent", 2.0));
      } else {
        throw FormatError("unknown SNR model '" + kind + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed replay config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::vector<int> EvaluationResult::undefined_intervals() const {
  std::vector<int> out;
  for (std::size_t t = 0; t < success_ratios.size(); ++t) {
    if (!success_ratios[t]) out.push_back(static_cast<int>(t));
  }
  return out;
}

std::optional<double> success_ratio(const LinkFeatures& features, const std::set<LinkId>& zoi, int t) {
  double holders = 0.0, nodes = 0.0;
  for (LinkId l : zoi) {
    holders += features.at(Feature::MeanContentHolders, l, t);
    nodes += features.at(Feature::MeanNodeCount, l, t);
  }
  if (nodes <= 0.0) return std::nullopt;
  return std::clamp(holders / nodes, 0.0, 1.0);
}

ReplayEngine::ReplayEngine(const ContactTrace& trace, const RoadGrid& grid, ReplayConfig cfg)
    : cfg_(std::move(cfg)),
      num_links_(static_cast<int>(grid.size())),
      num_nodes_(trace.num_nodes),
      dt_(trace.sample_dt),
      zoi_(grid.zoi()) {
  cfg_.validate();
  const double window = cfg_.window();
  if (window > trace.duration + 1e-6) {
    throw std::invalid_argument("trace (" + std::to_string(trace.duration) + " s) is shorter than the replay window (" +
                                std::to_string(window) + " s)");
  }
  const int T = num_intervals();
  boundaries_.resize(T);
  std::partial_sum(cfg_.intervals.begin(), cfg_.intervals.end(), boundaries_.begin());

  std::size_t K = 0;
  while (K < trace.samples.size() && trace.time_of(K) < window - kTimeTol) ++K;
  interval_of_.resize(K);
  samples_per_interval_.assign(T, 0);
  for (std::size_t k = 0; k < K; ++k) {
    interval_of_[k] = interval_at(trace.time_of(k));
    ++samples_per_interval_[interval_of_[k]];
  }
  for (int t = 0; t < T; ++t) {
    if (samples_per_interval_[t] == 0) {
      throw std::invalid_argument("interval " + std::to_string(t) + " contains no sample instant");
    }
  }

  rows_.assign(trace.samples.begin(), trace.samples.begin() + static_cast<std::ptrdiff_t>(K));
  for (const auto& row : rows_) {
    for (const auto& s : row) {
      if (s.link < 0 || s.link >= num_links_) {
        throw std::invalid_argument("trace references link " + std::to_string(s.link) + " not in the grid");
      }
    }
  }

  moves_.resize(K);
  for (std::size_t i = 0; i < trace.transitions.size(); ++i) {
    const auto& tr = trace.transitions[i];
    const auto k = static_cast<std::size_t>(std::llround(tr.time / dt_));
    if (k < K) moves_[k].push_back({tr.node, tr.link, static_cast<std::uint32_t>(i)});
  }

  starts_.resize(K);
  mobility_ = LinkFeatures(num_links_, T);
  std::vector<double> duration_sum(static_cast<std::size_t>(num_links_) * T, 0.0);
  std::vector<int> contact_count(duration_sum.size(), 0);
  for (const auto& c : trace.contacts) {
    const auto ks = static_cast<std::size_t>(std::llround(c.start_time / dt_));
    if (ks >= K) continue;
    const auto idx = static_cast<std::uint32_t>(contacts_.size());
    contacts_.push_back({c.node_a, c.node_b, c.link_a, c.link_b, c.end_time,
                         static_cast<std::uint32_t>(std::llround(c.end_time / dt_))});
    starts_[ks].push_back(idx);
    const int t = interval_of_[ks];
    auto attribute = [&](LinkId l) {
      const std::size_t cell = static_cast<std::size_t>(l) * T + t;
      ++contact_count[cell];
      duration_sum[cell] += c.duration();
    };
    attribute(c.link_a);
    if (c.link_b != c.link_a) attribute(c.link_b);
  }

  std::vector<double> speed_sum(duration_sum.size(), 0.0);
  std::vector<double> node_samples(duration_sum.size(), 0.0);
  seeds_.assign(num_links_, SeedSite{});
  for (std::size_t k = 0; k < K; ++k) {
    const int t = interval_of_[k];
    for (const auto& s : rows_[k]) {
      const std::size_t cell = static_cast<std::size_t>(s.link) * T + t;
      speed_sum[cell] += s.speed;
      node_samples[cell] += 1.0;
      if (t == 0 && seeds_[s.link].node < 0) seeds_[s.link] = {s.node, static_cast<std::uint32_t>(k)};
    }
  }
  for (LinkId l = 0; l < num_links_; ++l) {
    for (int t = 0; t < T; ++t) {
      const std::size_t cell = static_cast<std::size_t>(l) * T + t;
      mobility_.at(Feature::MeanSpeed, l, t) = node_samples[cell] > 0 ? speed_sum[cell] / node_samples[cell] : 0.0;
      mobility_.at(Feature::MeanNodeCount, l, t) = node_samples[cell] / samples_per_interval_[t];
      mobility_.at(Feature::ContactRate, l, t) = contact_count[cell] / cfg_.intervals[t];
      mobility_.at(Feature::MeanContactDuration, l, t) =
          contact_count[cell] > 0 ? duration_sum[cell] / contact_count[cell] : 0.0;
    }
  }
}

int ReplayEngine::interval_at(double time) const {
  const auto it = std::upper_bound(boundaries_.begin(), boundaries_.end(), time + kTimeTol);
  return std::min(static_cast<int>(it - boundaries_.begin()), num_intervals() - 1);
}

bool ReplayEngine::zoi_populated() const {
  for (int t = 0; t < num_intervals(); ++t) {
    if (success_ratio(mobility_, zoi_, t).has_value()) return true;
  }
  return false;
}

EvaluationResult ReplayEngine::run(const StrategyMatrix& strategy, std::uint64_t seed, int runs,
                                   ReplayLog* log) const {
  if (strategy.num_links() != num_links_ || strategy.num_intervals() != num_intervals()) {
    throw std::invalid_argument("strategy is " + std::to_string(strategy.num_links()) + "x" +
                                std::to_string(strategy.num_intervals()) + ", grid/window needs " +
                                std::to_string(num_links_) + "x" + std::to_string(num_intervals()));
  }
  if (runs < 1) throw std::invalid_argument("monte carlo runs must be >= 1");

  const int T = num_intervals();
  const std::size_t K = interval_of_.size();
  const std::size_t cells = static_cast<std::size_t>(num_links_) * T;
  std::vector<double> holder_sum(cells, 0.0), busy_sum(cells, 0.0);

  const bool fixed_snr = cfg_.snr.kind == SnrModel::Kind::Fixed;
  const double fixed_tx_time = cfg_.transfer_time(1.0);

  std::vector<std::uint8_t> holds(num_nodes_), present(num_nodes_);
  std::vector<LinkId> link(num_nodes_);
  std::vector<double> busy_until(num_nodes_);
  std::vector<Pending> pending;
  std::vector<std::uint32_t> open;

  if (log) log->holders.assign(runs, std::vector<int>(K, 0));

  for (int run = 0; run < runs; ++run) {
    const std::uint64_t run_seed = derive_seed(seed, static_cast<std::uint64_t>(run), 0x43464352);
    auto coin = [run_seed](CoinKind kind, std::uint64_t key) { return to_unit(derive_seed(run_seed, kind, key)); };
    auto note = [&](std::size_t k, HolderEventKind kind, NodeId node, LinkId l, int delta) {
      if (log) log->events.push_back({run, static_cast<int>(k), kind, node, l, delta});
    };

    std::fill(holds.begin(), holds.end(), 0);
    std::fill(present.begin(), present.end(), 0);
    std::fill(link.begin(), link.end(), kNoLink);
    std::fill(busy_until.begin(), busy_until.end(), -1.0);
    pending.clear();
    open.clear();

    for (std::size_t k = 0; k < K; ++k) {
      const double now = static_cast<double>(k) * dt_;
      const int t = interval_of_[k];

      // 1. completed transfers
      for (std::size_t i = 0; i < pending.size();) {
        const Pending p = pending[i];
        if (p.completes_at > now + kTimeTol) {
          ++i;
          continue;
        }
        pending[i] = pending.back();
        pending.pop_back();
        if (holds[p.receiver] || !present[p.receiver]) continue;
        const LinkId at = link[p.receiver];
        if (coin(kReceiveCoin, p.contact) < strategy.b(at, interval_at(p.completes_at))) {
          holds[p.receiver] = 1;
          note(k, HolderEventKind::TransferKept, p.receiver, at, +1);
        } else {
          note(k, HolderEventKind::TransferDiscarded, p.receiver, at, 0);
        }
      }

      // 2. link transitions
      for (const Move& m : moves_[k]) {
        if (m.link == kNoLink) {
          if (holds[m.node]) note(k, HolderEventKind::Exit, m.node, link[m.node], -1);
          holds[m.node] = 0;
          present[m.node] = 0;
          link[m.node] = kNoLink;
        } else if (!present[m.node]) {
          present[m.node] = 1;
          link[m.node] = m.link;
        } else {
          link[m.node] = m.link;
          if (holds[m.node] && !(coin(kMoveCoin, m.index) < strategy.b(m.link, t))) {
            holds[m.node] = 0;
            note(k, HolderEventKind::Drop, m.node, m.link, -1);
          }
        }
      }

      // 3. seeding
      if (t == 0) {
        for (LinkId l = 0; l < num_links_; ++l) {
          const SeedSite& site = seeds_[l];
          if (site.node < 0 || site.k != k || !(strategy.a(l, 0) > 0.0) || holds[site.node]) continue;
          if (coin(kSeedCoin, static_cast<std::uint64_t>(l)) < strategy.b(l, 0)) {
            holds[site.node] = 1;
            note(k, HolderEventKind::Seed, site.node, l, +1);
          } else {
            note(k, HolderEventKind::SeedDiscarded, site.node, l, 0);
          }
        }
      }

      // 4. transfer opportunities
      open.insert(open.end(), starts_[k].begin(), starts_[k].end());
      std::size_t kept = 0;
      for (std::size_t i = 0; i < open.size(); ++i) {
        const std::uint32_t ci = open[i];
        const IndexedContact& c = contacts_[ci];
        if (c.end_k < k) continue;
        const bool ha = holds[c.a] != 0, hb = holds[c.b] != 0;
        if (ha == hb || busy_until[c.a] > now + kTimeTol || busy_until[c.b] > now + kTimeTol) {
          open[kept++] = ci;
          continue;
        }
        // The opportunity is used up whatever the outcome.
        const NodeId sender = ha ? c.a : c.b;
        const NodeId receiver = ha ? c.b : c.a;
        const LinkId sender_link = ha ? c.link_a : c.link_b;
        if (!(coin(kAttemptCoin, ci) < strategy.a(sender_link, t))) continue;
        double tx_time = fixed_tx_time;
        if (!fixed_snr) {
          Point pa{}, pb{};
          for (const auto& s : rows_[k]) {
            if (s.node == c.a) pa = s.position;
            if (s.node == c.b) pb = s.position;
          }
          tx_time = cfg_.transfer_time(distance(pa, pb));
        }
        if (c.end - now + kTimeTol < tx_time) continue;
        busy_until[sender] = busy_until[receiver] = now + tx_time;
        pending.push_back({now + tx_time, sender, receiver, ci});
      }
      open.resize(kept);

      // 5. measurement
      int holders_now = 0;
      for (const auto& s : rows_[k]) {
        const std::size_t cell = static_cast<std::size_t>(s.link) * T + t;
        if (holds[s.node]) {
          holder_sum[cell] += 1.0;
          ++holders_now;
        }
        if (busy_until[s.node] > now + kTimeTol) busy_sum[cell] += 1.0;
      }
      if (log) log->holders[run][k] = holders_now;
    }
  }

  EvaluationResult result;
  result.features = mobility_;
  result.runs_aggregated = runs;
  for (LinkId l = 0; l < num_links_; ++l) {
    for (int t = 0; t < T; ++t) {
      const std::size_t cell = static_cast<std::size_t>(l) * T + t;
      const double denom = static_cast<double>(runs) * samples_per_interval_[t];
      result.features.at(Feature::MeanContentHolders, l, t) = holder_sum[cell] / denom;
      result.features.at(Feature::MeanConcurrentTransmissions, l, t) = busy_sum[cell] / denom;
    }
  }
  for (int t = 0; t < T; ++t) result.success_ratios.push_back(success_ratio(result.features, zoi_, t));
  return result;
}

EvaluationResult replay_cfc(const ContactTrace& trace, const StrategyMatrix& strategy,
                            const ReplayConfig& cfg, const RoadGrid& grid) {
  return ReplayEngine(trace, grid, cfg).run(strategy);
}

nlohmann::json to_json(const LinkFeatures& features) {
  nlohmann::json values = nlohmann::json::array();
  for (LinkId l = 0; l < features.num_links(); ++l) {
    nlohmann::json per_link = nlohmann::json::array();
    for (int t = 0; t < features.num_intervals(); ++t) {
      nlohmann::json cell = nlohmann::json::array();
      for (int f = 0; f < kNumFeatures; ++f) cell.push_back(features.at(static_cast<Feature>(f), l, t));
      per_link.push_back(std::move(cell));
    }
    values.push_back(std::move(per_link));
  }
  return {{"feature_order", kFeatureNames},
          {"num_links", features.num_links()},
          {"num_intervals", features.num_intervals()},
          {"values", std::move(values)}};
}

LinkFeatures link_features_from_json(const nlohmann::json& doc) {
  try {
    LinkFeatures f(doc.at("num_links").get<int>(), doc.at("num_intervals").get<int>());
    const auto& values = doc.at("values");
    for (LinkId l = 0; l < f.num_links(); ++l) {
      for (int t = 0; t < f.num_intervals(); ++t) {
        for (int k = 0; k < kNumFeatures; ++k) f.at(static_cast<Feature>(k), l, t) = values.at(l).at(t).at(k).get<double>();
      }
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed features document: ") + e.what());
  }
}

nlohmann::json to_json(const EvaluationResult& result) {
  nlohmann::json alpha = nlohmann::json::array();
  for (const auto& a : result.success_ratios) alpha.push_back(a ? nlohmann::json(*a) : nlohmann::json(nullptr));
  return {{"success_ratios", std::move(alpha)},
          {"cost", result.cost},
          {"feasible", result.feasible},
          {"runs_aggregated", result.runs_aggregated},
          {"undefined_intervals", result.undefined_intervals()},
          {"features", to_json(result.features)}};
}

void write_features_csv(std::ostream& out, const LinkFeatures& features) {
  out << "link";
  for (int t = 0; t < features.num_intervals(); ++t) {
    for (auto name : kFeatureNames) out << ",t" << t << '_' << name;
  }
  out << '\n';
  out.precision(17);
  for (LinkId l = 0; l < features.num_links(); ++l) {
    out << l;
    for (int t = 0; t < features.num_intervals(); ++t) {
      for (int f = 0; f < kNumFeatures; ++f) out << ',' << features.at(static_cast<Feature>(f), l, t);
    }
    out << '\n';
  }
}

}  // namespace cfc
