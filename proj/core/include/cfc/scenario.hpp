#pragma once

#include "cfc/cost_model.hpp"
#include "cfc/mobility.hpp"
#include "cfc/optimizer.hpp"
#include "cfc/replay.hpp"
#include "cfc/road_grid.hpp"

namespace cfc {

/// Everything needed to go from a street grid to an optimized strategy.
struct Scenario {
  int blocks_x = 3;
  int blocks_y = 4;
  double block_side = 150.0;
  MobilityConfig mobility;
  ReplayConfig replay;
  CostConfig cost;
  SearchConfig search;

  /// Manhattan grid with the central link as ZOI.
  RoadGrid grid() const;
};

/// Full-size settings: one hour measured after a 150 s warmup, 3 arrivals
/// per second on every border link.
Scenario reference_scenario();

/// Same geometry and radio settings scaled down to run in seconds: a 150 s
/// window with a sixtieth of the arrivals and a capped search.
Scenario desk_scenario();

}  // namespace cfc
