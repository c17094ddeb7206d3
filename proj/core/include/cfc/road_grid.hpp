#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace cfc {

using LinkId = std::int32_t;
inline constexpr LinkId kNoLink = -1;

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(Point p, Point q) { return std::hypot(p.x - q.x, p.y - q.y); }

struct RoadLink {
  LinkId id = kNoLink;
  Point a;
  Point b;
  double length = 0.0;
  bool is_border = false;  // nodes may enter or leave the grid here
  std::vector<LinkId> neighbor_ids;

  Point midpoint() const { return {(a.x + b.x) / 2, (a.y + b.y) / 2}; }
};

/// Shared endpoint of one or more links.
struct Intersection {
  Point position;
  std::vector<LinkId> links;
  bool on_boundary = false;
};

/// Placement of every link on a 2D cell lattice, used to arrange per-link
/// features spatially. For a Manhattan grid of bx x by blocks the lattice is
/// (2*by+1) x (2*bx+1).
struct GridLayout {
  int rows = 0;
  int cols = 0;
  std::vector<std::pair<int, int>> cell_of_link;  // (row, col) per link id

  friend bool operator==(const GridLayout&, const GridLayout&) = default;
};

/// Undirected road network: links are street segments between adjacent
/// intersections. Immutable once built.
class RoadGrid {
 public:
  struct LinkSpec {
    Point a;
    Point b;
    bool is_border = false;
  };

  RoadGrid() = default;

  /// Builds the topology from raw segments. Throws std::invalid_argument on
  /// zero-length links, unknown ZOI ids or a disconnected graph.
  explicit RoadGrid(std::vector<LinkSpec> specs, std::set<LinkId> zoi = {});

  std::size_t size() const { return links_.size(); }
  std::span<const RoadLink> links() const { return links_; }
  const RoadLink& link(LinkId id) const;

  const std::set<LinkId>& zoi() const { return zoi_; }
  bool in_zoi(LinkId id) const { return zoi_mask_.at(static_cast<std::size_t>(id)); }

  std::span<const Intersection> intersections() const { return intersections_; }
  /// Intersection index of endpoint `a` (which = 0) or `b` (which = 1).
  int endpoint_node(LinkId id, int which) const;

  /// Center of the bounding box of all endpoints.
  Point centroid() const;
  GridLayout layout() const;

  /// Copy of this grid with the ZOI replaced.
  RoadGrid with_zoi(std::set<LinkId> zoi) const;

 private:
  std::vector<RoadLink> links_;
  std::vector<Intersection> intersections_;
  std::vector<std::pair<int, int>> endpoints_;
  std::set<LinkId> zoi_;
  std::vector<bool> zoi_mask_;
};

RoadGrid build_manhattan_grid(int blocks_x, int blocks_y, double block_side);

/// Number of links of a bx x by block lattice: (bx+1)*by + (by+1)*bx.
constexpr int manhattan_link_count(int blocks_x, int blocks_y) {
  return (blocks_x + 1) * blocks_y + (blocks_y + 1) * blocks_x;
}

RoadGrid set_zoi(const RoadGrid& grid, const std::set<LinkId>& link_ids);

/// Links whose midpoint is nearest the grid centroid.
std::set<LinkId> center_zoi(const RoadGrid& grid);

nlohmann::json grid_to_json(const RoadGrid& grid);
RoadGrid grid_from_json(const nlohmann::json& doc);
void save_grid(const RoadGrid& grid, const std::filesystem::path& path);
RoadGrid load_grid(const std::filesystem::path& path);

}  // namespace cfc
