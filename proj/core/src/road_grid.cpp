#include "cfc/road_grid.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <queue>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "cfc/errors.hpp"

namespace cfc {
namespace {

constexpr double kCoordResolution = 1e-6;

std::pair<long long, long long> coord_key(Point p) {
  return {std::llround(p.x / kCoordResolution), std::llround(p.y / kCoordResolution)};
}

// Assigns dense ranks to values equal up to `tol`.
std::vector<int> rank_values(const std::vector<double>& values, double tol) {
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> unique;
  for (double v : sorted) {
    if (unique.empty() || v - unique.back() > tol) unique.push_back(v);
  }
  std::vector<int> ranks;
  ranks.reserve(values.size());
  for (double v : values) {
    auto it = std::lower_bound(unique.begin(), unique.end(), v - tol);
    ranks.push_back(static_cast<int>(it - unique.begin()));
  }
  return ranks;
}

}  // namespace

RoadGrid::RoadGrid(std::vector<LinkSpec> specs, std::set<LinkId> zoi) {
  if (specs.empty()) throw std::invalid_argument("road grid needs at least one link");

  std::map<std::pair<long long, long long>, int> node_index;
  auto intern = [&](Point p) {
    auto [it, inserted] = node_index.try_emplace(coord_key(p), static_cast<int>(intersections_.size()));
    if (inserted) intersections_.push_back(Intersection{p, {}, false});
    return it->second;
  };

  links_.reserve(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    RoadLink link;
    link.id = static_cast<LinkId>(i);
    link.a = s.a;
    link.b = s.b;
    link.length = distance(s.a, s.b);
    link.is_border = s.is_border;
    if (!(link.length > 0.0)) {
      throw std::invalid_argument("link " + std::to_string(i) + " has non-positive length");
    }
    const int na = intern(s.a);
    const int nb = intern(s.b);
    intersections_[na].links.push_back(link.id);
    intersections_[nb].links.push_back(link.id);
    endpoints_.emplace_back(na, nb);
    links_.push_back(std::move(link));
  }

  for (auto& link : links_) {
    const auto [na, nb] = endpoints_[link.id];
    std::set<LinkId> nbrs;
    for (int n : {na, nb}) {
      for (LinkId other : intersections_[n].links) {
        if (other != link.id) nbrs.insert(other);
      }
    }
    link.neighbor_ids.assign(nbrs.begin(), nbrs.end());
  }

  // Outer boundary: intersections on the bounding box, plus dead ends.
  double xmin = std::numeric_limits<double>::infinity(), ymin = xmin;
  double xmax = -xmin, ymax = -xmin;
  for (const auto& n : intersections_) {
    xmin = std::min(xmin, n.position.x);
    xmax = std::max(xmax, n.position.x);
    ymin = std::min(ymin, n.position.y);
    ymax = std::max(ymax, n.position.y);
  }
  const double tol = 1e-6;
  for (auto& n : intersections_) {
    const Point p = n.position;
    n.on_boundary = std::abs(p.x - xmin) < tol || std::abs(p.x - xmax) < tol ||
                    std::abs(p.y - ymin) < tol || std::abs(p.y - ymax) < tol ||
                    n.links.size() == 1;
  }

  // Connectivity.
  std::vector<bool> seen(links_.size(), false);
  std::queue<LinkId> frontier;
  frontier.push(0);
  seen[0] = true;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    const LinkId cur = frontier.front();
    frontier.pop();
    for (LinkId n : links_[cur].neighbor_ids) {
      if (!seen[n]) {
        seen[n] = true;
        ++reached;
        frontier.push(n);
      }
    }
  }
  if (reached != links_.size()) throw std::invalid_argument("road grid is not connected");

  zoi_mask_.assign(links_.size(), false);
  for (LinkId id : zoi) {
    if (id < 0 || static_cast<std::size_t>(id) >= links_.size()) {
      throw std::invalid_argument("ZOI references unknown link " + std::to_string(id));
    }
    zoi_mask_[id] = true;
  }
  zoi_ = std::move(zoi);
}

const RoadLink& RoadGrid::link(LinkId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= links_.size()) {
    throw std::out_of_range("unknown link " + std::to_string(id));
  }
  return links_[id];
}

int RoadGrid::endpoint_node(LinkId id, int which) const {
  const auto& e = endpoints_.at(static_cast<std::size_t>(id));
  return which == 0 ? e.first : e.second;
}

Point RoadGrid::centroid() const {
  double xmin = std::numeric_limits<double>::infinity(), ymin = xmin;
  double xmax = -xmin, ymax = -xmin;
  for (const auto& n : intersections_) {
    xmin = std::min(xmin, n.position.x);
    xmax = std::max(xmax, n.position.x);
    ymin = std::min(ymin, n.position.y);
    ymax = std::max(ymax, n.position.y);
  }
  return {(xmin + xmax) / 2, (ymin + ymax) / 2};
}

GridLayout RoadGrid::layout() const {
  std::vector<double> xs, ys;
  for (const auto& l : links_) {
    xs.push_back(l.midpoint().x);
    ys.push_back(l.midpoint().y);
  }
  const auto cols = rank_values(xs, 1e-3);
  const auto rows = rank_values(ys, 1e-3);
  GridLayout layout;
  layout.rows = links_.empty() ? 0 : *std::max_element(rows.begin(), rows.end()) + 1;
  layout.cols = links_.empty() ? 0 : *std::max_element(cols.begin(), cols.end()) + 1;
  std::set<std::pair<int, int>> used;
  bool collision = false;
  for (std::size_t i = 0; i < links_.size(); ++i) {
    layout.cell_of_link.emplace_back(rows[i], cols[i]);
    collision |= !used.insert(layout.cell_of_link.back()).second;
  }
  if (collision) {
    // Not a lattice: fall back to a single row in id order.
    layout.rows = 1;
    layout.cols = static_cast<int>(links_.size());
    for (std::size_t i = 0; i < links_.size(); ++i) layout.cell_of_link[i] = {0, static_cast<int>(i)};
  }
  return layout;
}

RoadGrid RoadGrid::with_zoi(std::set<LinkId> zoi) const {
  for (LinkId id : zoi) {
    if (id < 0 || static_cast<std::size_t>(id) >= links_.size()) {
      throw std::invalid_argument("ZOI references unknown link " + std::to_string(id));
    }
  }
  RoadGrid copy = *this;
  copy.zoi_mask_.assign(links_.size(), false);
  for (LinkId id : zoi) copy.zoi_mask_[id] = true;
  copy.zoi_ = std::move(zoi);
  return copy;
}

RoadGrid build_manhattan_grid(int blocks_x, int blocks_y, double block_side) {
  if (blocks_x < 1 || blocks_y < 1 || !(block_side > 0.0)) {
    throw std::invalid_argument("Manhattan grid needs blocks_x, blocks_y >= 1 and block_side > 0");
  }
  auto on_boundary = [&](int i, int j) {
    return i == 0 || j == 0 || i == blocks_x || j == blocks_y;
  };
  auto at = [&](int i, int j) { return Point{i * block_side, j * block_side}; };

  std::vector<RoadGrid::LinkSpec> specs;
  specs.reserve(manhattan_link_count(blocks_x, blocks_y));
  for (int j = 0; j <= blocks_y; ++j) {
    for (int i = 0; i < blocks_x; ++i) {
      specs.push_back({at(i, j), at(i + 1, j), on_boundary(i, j) || on_boundary(i + 1, j)});
    }
  }
  for (int i = 0; i <= blocks_x; ++i) {
    for (int j = 0; j < blocks_y; ++j) {
      specs.push_back({at(i, j), at(i, j + 1), on_boundary(i, j) || on_boundary(i, j + 1)});
    }
  }
  return RoadGrid(std::move(specs));
}

RoadGrid set_zoi(const RoadGrid& grid, const std::set<LinkId>& link_ids) {
  return grid.with_zoi(link_ids);
}

std::set<LinkId> center_zoi(const RoadGrid& grid) {
  const Point c = grid.centroid();
  double best = std::numeric_limits<double>::infinity();
  for (const auto& l : grid.links()) best = std::min(best, distance(l.midpoint(), c));
  std::set<LinkId> out;
  for (const auto& l : grid.links()) {
    if (distance(l.midpoint(), c) <= best + 1e-6) out.insert(l.id);
  }
  return out;
}

nlohmann::json grid_to_json(const RoadGrid& grid) {
  nlohmann::json links = nlohmann::json::array();
  for (const auto& l : grid.links()) {
    links.push_back({{"id", l.id}, {"x1", l.a.x}, {"y1", l.a.y}, {"x2", l.b.x}, {"y2", l.b.y},
                     {"is_border", l.is_border}});
  }
  return {{"links", std::move(links)}, {"zoi", grid.zoi()}};
}

RoadGrid grid_from_json(const nlohmann::json& doc) {
  try {
    std::vector<RoadGrid::LinkSpec> specs;
    const auto& links = doc.at("links");
    for (std::size_t i = 0; i < links.size(); ++i) {
      const auto& l = links[i];
      if (l.at("id").get<LinkId>() != static_cast<LinkId>(i)) {
        throw FormatError("grid link ids must be dense and ordered 0..N-1");
      }
      specs.push_back({{l.at("x1").get<double>(), l.at("y1").get<double>()},
                       {l.at("x2").get<double>(), l.at("y2").get<double>()},
                       l.at("is_border").get<bool>()});
    }
    std::set<LinkId> zoi;
    if (doc.contains("zoi")) zoi = doc.at("zoi").get<std::set<LinkId>>();
    return RoadGrid(std::move(specs), std::move(zoi));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed grid document: ") + e.what());
  }
}

void save_grid(const RoadGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << grid_to_json(grid).dump(2) << '\n';
}

RoadGrid load_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return grid_from_json(doc);
}

}  // namespace cfc
