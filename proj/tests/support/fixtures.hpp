#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "cfc/mobility.hpp"
#include "cfc/road_grid.hpp"
#include "cfc/scenario.hpp"

namespace cfc::test {

/// One square block: link 0 bottom, 1 top, 2 left, 3 right.
inline RoadGrid single_block(std::set<LinkId> zoi = {0}) {
  return set_zoi(build_manhattan_grid(1, 1, 150.0), zoi);
}

/// Trace of pinned nodes only; every pair within range is in contact for
/// the whole trace.
inline ContactTrace pinned_trace(const RoadGrid& grid, const std::vector<PinnedNode>& nodes, double duration,
                                 double radius = 100.0) {
  MobilityConfig cfg;
  cfg.arrival_rate = 0.0;
  cfg.duration = duration;
  cfg.warmup = 0.0;
  cfg.tx_radius = radius;
  SimulationHooks hooks;
  hooks.pinned = nodes;
  return simulate_mobility(grid, cfg, hooks);
}

inline ContactTrace desk_trace(std::uint64_t seed) {
  Scenario scn = desk_scenario();
  scn.mobility.rng_seed = seed;
  return simulate_mobility(scn.grid(), scn.mobility);
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / ("cfc_" + name + "_" + std::to_string(::getpid()))) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& f) const { return path_ / f; }

 private:
  std::filesystem::path path_;
};

}  // namespace cfc::test
