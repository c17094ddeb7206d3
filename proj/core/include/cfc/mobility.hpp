#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfc/road_grid.hpp"

namespace cfc {

using NodeId = std::int32_t;

inline constexpr double kmh_to_ms(double kmh) { return kmh / 3.6; }

struct SpeedModel {
  enum class Kind { Constant, UniformRange };

  Kind kind = Kind::Constant;
  double lo_kmh = 60.0;
  double hi_kmh = 60.0;

  static SpeedModel constant(double kmh) { return {Kind::Constant, kmh, kmh}; }
  static SpeedModel uniform(double lo_kmh, double hi_kmh) { return {Kind::UniformRange, lo_kmh, hi_kmh}; }

  /// "60" for constant speeds, "[0,60]" for ranges (km/h).
  std::string describe() const;
  static SpeedModel parse(const std::string& text);
};

struct MobilityConfig {
  double arrival_rate = 3.0;  // nodes per second per border link
  SpeedModel speed = SpeedModel::constant(60.0);
  double tx_radius = 100.0;  // meters
  double duration = 3600.0;  // seconds of recorded trace
  double sample_dt = 1.0;
  double warmup = 150.0;     // simulated before t = 0, not recorded
  std::uint64_t rng_seed = 1;

  void validate() const;
};

nlohmann::json to_json(const MobilityConfig& cfg);
MobilityConfig mobility_config_from_json(const nlohmann::json& doc);

struct NodeSample {
  NodeId node = 0;
  LinkId link = kNoLink;
  Point position;
  double speed = 0.0;  // m/s
};

/// Maximal interval during which two nodes were within range. Times are
/// sample instants; node_a < node_b.
struct Contact {
  NodeId node_a = 0;
  NodeId node_b = 0;
  double start_time = 0.0;
  double end_time = 0.0;
  LinkId link_a = kNoLink;  // link of node_a at start_time
  LinkId link_b = kNoLink;

  double duration() const { return end_time - start_time; }
};

/// A node observed on a new link (first appearance included), or leaving
/// the grid when link == kNoLink. Times are sample instants.
struct LinkTransition {
  NodeId node = 0;
  LinkId link = kNoLink;
  double time = 0.0;

  bool is_exit() const { return link == kNoLink; }
  friend bool operator==(const LinkTransition&, const LinkTransition&) = default;
};

struct ContactTrace {
  double sample_dt = 1.0;
  double duration = 0.0;
  double tx_radius = 0.0;
  NodeId num_nodes = 0;
  std::vector<std::vector<NodeSample>> samples;  // samples[k] holds time k*sample_dt, sorted by node
  std::vector<Contact> contacts;                 // sorted by (start_time, node_a, node_b)
  std::vector<LinkTransition> transitions;       // sorted by (time, node)
  std::optional<MobilityConfig> config;          // set when produced by simulate_mobility

  std::size_t num_samples() const { return samples.size(); }
  double time_of(std::size_t k) const { return static_cast<double>(k) * sample_dt; }
};

/// Number of sample instants k*dt in [0, duration].
std::size_t sample_count(double duration, double sample_dt);

/// Stationary node placed at `offset` meters from the link's first endpoint,
/// present for the whole run.
struct PinnedNode {
  LinkId link = 0;
  double offset = 0.0;
};

/// Deterministic arrival replacing (or adding to) the Poisson stream.
struct ScheduledArrival {
  LinkId link = 0;
  double time = 0.0;
  double speed_kmh = 60.0;
  int from_endpoint = 0;  // 0 enters at link.a, 1 at link.b
};

struct SimulationHooks {
  std::vector<PinnedNode> pinned;
  std::vector<ScheduledArrival> arrivals;
};

/// Poisson arrivals on border links, constant per-node speed, uniform random
/// turns at intersections (no U-turn unless at a dead end) and exit as one
/// of the options at boundary intersections. Contacts are detected at every
/// sample instant.
ContactTrace simulate_mobility(const RoadGrid& grid, const MobilityConfig& cfg,
                               const SimulationHooks& hooks = {});

/// Builds a trace from hand-written records and validates it. When
/// `transitions` is empty they are derived from the samples; otherwise they
/// must match the samples exactly. Throws ValidationError.
ContactTrace inject_trace(double sample_dt, double duration, double tx_radius,
                          std::vector<std::vector<NodeSample>> samples,
                          std::vector<Contact> contacts,
                          std::vector<LinkTransition> transitions = {});

std::vector<LinkTransition> derive_transitions(const ContactTrace& trace);

/// Throws ValidationError when any trace invariant is broken.
void validate_trace(const ContactTrace& trace);

// Newline-delimited JSON: a header object then one object per sample row,
// contact and transition.
void write_trace(std::ostream& out, const ContactTrace& trace);
std::string serialize_trace(const ContactTrace& trace);
ContactTrace parse_trace(std::istream& in);
/// Writes gzip when the path ends in ".gz".
void save_trace(const ContactTrace& trace, const std::filesystem::path& path);
/// Reads plain or gzip-compressed files.
ContactTrace load_trace(const std::filesystem::path& path);

}  // namespace cfc
