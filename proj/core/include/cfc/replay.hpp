#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cfc/mobility.hpp"
#include "cfc/road_grid.hpp"
#include "cfc/strategy.hpp"

namespace cfc {

/// Per-link feature columns, in the fixed export order. The first two are
/// mobility features (available at inference time); the rest describe
/// communication and depend on the strategy.
enum class Feature : int {
  MeanSpeed = 0,
  MeanNodeCount,
  ContactRate,
  MeanContactDuration,
  MeanContentHolders,
  MeanConcurrentTransmissions,
};

inline constexpr int kNumFeatures = 6;
inline constexpr int kNumMobilityFeatures = 2;
inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "mean_speed",           "mean_node_count",      "contact_rate",
    "mean_contact_duration", "mean_content_holders", "mean_concurrent_transmissions"};

constexpr bool is_mobility_feature(Feature f) { return static_cast<int>(f) < kNumMobilityFeatures; }

class LinkFeatures {
 public:
  LinkFeatures() = default;
  LinkFeatures(int num_links, int num_intervals);

  int num_links() const { return links_; }
  int num_intervals() const { return intervals_; }

  double at(Feature f, LinkId l, int t) const { return values_[static_cast<int>(f)][index(l, t)]; }
  double& at(Feature f, LinkId l, int t) { return values_[static_cast<int>(f)][index(l, t)]; }

  /// Features of interval t flattened link by link, kFeatureNames order.
  std::vector<double> interval_row(int t) const;

  friend bool operator==(const LinkFeatures&, const LinkFeatures&) = default;

 private:
  std::size_t index(LinkId l, int t) const { return static_cast<std::size_t>(l) * intervals_ + t; }

  int links_ = 0;
  int intervals_ = 0;
  std::array<std::vector<double>, kNumFeatures> values_;
};

struct SnrModel {
  enum class Kind { Fixed, PathLoss };

  Kind kind = Kind::Fixed;
  double linear = 10.0;   // Fixed: SNR; PathLoss: SNR at 1 m
  double exponent = 2.0;  // PathLoss only

  static SnrModel fixed(double linear) { return {Kind::Fixed, linear, 0.0}; }
  static SnrModel fixed_db(double db);
  static SnrModel path_loss(double linear_at_1m, double exponent) { return {Kind::PathLoss, linear_at_1m, exponent}; }

  double at(double meters) const;
};

struct ReplayConfig {
  std::vector<double> intervals{3600.0};  // d_t, seconds
  double content_size = 3.2e7;            // D, bits (4 MB)
  double bandwidth = 4e6;                 // Hz
  SnrModel snr = SnrModel::fixed_db(10.0);
  std::uint64_t rng_seed = 1;
  int monte_carlo_runs = 1;

  void validate() const;
  double window() const;
  /// Shannon capacity in bit/s at the given sender-receiver distance.
  double capacity(double meters) const;
  double transfer_time(double meters) const { return content_size / capacity(meters); }
};

nlohmann::json to_json(const ReplayConfig& cfg);
ReplayConfig replay_config_from_json(const nlohmann::json& doc);

struct EvaluationResult {
  LinkFeatures features;
  std::vector<std::optional<double>> success_ratios;  // empty optional: no ZOI population
  double cost = 0.0;       // filled by score()
  bool feasible = false;   // filled by score()
  int runs_aggregated = 0;

  std::vector<int> undefined_intervals() const;
};

/// Success ratio of interval t over the ZOI, undefined when nobody is there.
std::optional<double> success_ratio(const LinkFeatures& features, const std::set<LinkId>& zoi, int t);

enum class HolderEventKind { Seed, SeedDiscarded, TransferKept, TransferDiscarded, Drop, Exit };

struct HolderEvent {
  int run = 0;
  int sample = 0;
  HolderEventKind kind = HolderEventKind::Seed;
  NodeId node = 0;
  LinkId link = kNoLink;
  int delta = 0;  // change of the holder count
};

/// Instrumented record of every holder-count change, plus the number of
/// holders observed at each sample instant of each run.
struct ReplayLog {
  std::vector<HolderEvent> events;
  std::vector<std::vector<int>> holders;  // [run][sample]
};

/// Replays a contact trace under arbitrary strategies. Trace-dependent work
/// (indexing, mobility statistics) happens once at construction; run() is
/// const and may be called concurrently.
///
/// Per Monte Carlo run, at every sample instant of the window:
///  1. transfers whose transmission time has elapsed complete, and the
///     receiver keeps the copy with probability b of its link;
///  2. link transitions apply: a holder entering link l' keeps the content
///     with probability b(l', t); a holder leaving the grid loses it;
///  3. during interval 0, each link with a(l, 0) > 0 seeds the first node
///     seen on it (kept with probability b(l, 0));
///  4. every open contact gets one transfer opportunity, taken at the first
///     instant exactly one endpoint holds the content and both endpoints are
///     idle: with probability a(sender link at contact start, t) a transfer
///     starts, provided the rest of the contact lasts at least D / capacity;
///  5. holders and nodes engaged in a transfer (either end) are counted
///     per link.
class ReplayEngine {
 public:
  ReplayEngine(const ContactTrace& trace, const RoadGrid& grid, ReplayConfig cfg);

  EvaluationResult run(const StrategyMatrix& strategy) const {
    return run(strategy, cfg_.rng_seed, cfg_.monte_carlo_runs);
  }
  EvaluationResult run(const StrategyMatrix& strategy, std::uint64_t seed, int runs,
                       ReplayLog* log = nullptr) const;

  const ReplayConfig& config() const { return cfg_; }
  int num_links() const { return num_links_; }
  int num_intervals() const { return static_cast<int>(cfg_.intervals.size()); }
  std::span<const double> durations() const { return cfg_.intervals; }
  const std::set<LinkId>& zoi() const { return zoi_; }
  std::size_t window_samples() const { return interval_of_.size(); }

  /// Strategy-independent columns; communication columns other than contact
  /// statistics are zero.
  const LinkFeatures& mobility_features() const { return mobility_; }
  /// True when some ZOI link has a node in some interval.
  bool zoi_populated() const;

 private:
  struct IndexedContact {
    NodeId a;
    NodeId b;
    LinkId link_a;
    LinkId link_b;
    double end;
    std::uint32_t end_k;
  };
  struct Move {
    NodeId node;
    LinkId link;
    std::uint32_t index;
  };
  struct SeedSite {
    NodeId node = -1;
    std::uint32_t k = 0;
  };

  int interval_at(double time) const;

  ReplayConfig cfg_;
  int num_links_ = 0;
  NodeId num_nodes_ = 0;
  double dt_ = 1.0;
  std::set<LinkId> zoi_;
  std::vector<double> boundaries_;  // cumulative interval ends
  std::vector<int> interval_of_;    // per window sample
  std::vector<int> samples_per_interval_;
  std::vector<std::vector<NodeSample>> rows_;
  std::vector<std::vector<Move>> moves_;
  std::vector<std::vector<std::uint32_t>> starts_;
  std::vector<IndexedContact> contacts_;
  std::vector<SeedSite> seeds_;
  LinkFeatures mobility_;
};

EvaluationResult replay_cfc(const ContactTrace& trace, const StrategyMatrix& strategy,
                            const ReplayConfig& cfg, const RoadGrid& grid);

nlohmann::json to_json(const EvaluationResult& result);
nlohmann::json to_json(const LinkFeatures& features);
LinkFeatures link_features_from_json(const nlohmann::json& doc);
/// One row per link; columns t<i>_<feature> for every interval and feature.
void write_features_csv(std::ostream& out, const LinkFeatures& features);

}  // namespace cfc
