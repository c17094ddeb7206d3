#include "cfc/scenario.hpp"

namespace cfc {

RoadGrid Scenario::grid() const {
  const RoadGrid g = build_manhattan_grid(blocks_x, blocks_y, block_side);
  return set_zoi(g, center_zoi(g));
}

Scenario reference_scenario() {
  Scenario s;
  s.replay.intervals = {3600.0};
  s.replay.monte_carlo_runs = 8;
  return s;
}

Scenario desk_scenario() {
  Scenario s;
  s.mobility.arrival_rate = 0.05;
  s.mobility.duration = 150.0;
  s.mobility.warmup = 60.0;
  s.replay.intervals = {150.0};
  s.replay.monte_carlo_runs = 8;
  s.search.monte_carlo_runs = 8;
  s.search.max_oracle_calls = 3000;
  return s;
}

}  // namespace cfc
