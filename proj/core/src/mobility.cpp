#include "cfc/mobility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "cfc/errors.hpp"
#include "cfc/rng.hpp"

namespace cfc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTimeTol = 1e-6;

struct Segment {
  LinkId link = kNoLink;
  Point from;
  Point to;
  double t_enter = 0.0;
  double t_leave = kInf;
};

struct Walker {
  double t_arrive = 0.0;
  double t_exit = kInf;
  double speed = 0.0;  // m/s
  std::vector<Segment> segments;
  // Sort key for id assignment.
  int origin = 0;     // 0 pinned, 1 Poisson/scheduled
  LinkId origin_link = 0;
  std::uint64_t seq = 0;
};

double draw_speed_kmh(const SpeedModel& model, Rng& rng) {
  auto draw = [&] {
    return model.kind == SpeedModel::Kind::Constant ? model.lo_kmh
                                                    : rng.uniform(model.lo_kmh, model.hi_kmh);
  };
  double v = draw();
  if (v == 0.0) v = draw();
  if (v == 0.0) v = 1.0;
  return v;
}

// Walks from intersection `start_node` along `first_link` until the node leaves the
// grid or the horizon passes.
Walker route(const RoadGrid& grid, LinkId first_link, int start_node, double t0, double speed_ms,
             double horizon, Rng& rng) {
  Walker w;
  w.t_arrive = t0;
  w.speed = speed_ms;
  LinkId link = first_link;
  int from = start_node;
  double t = t0;
  const auto nodes = grid.intersections();
  while (true) {
    const RoadLink& l = grid.link(link);
    const int to = grid.endpoint_node(link, 0) == from ? grid.endpoint_node(link, 1)
                                                       : grid.endpoint_node(link, 0);
    const double t_leave = t + l.length / speed_ms;
    w.segments.push_back({link, nodes[from].position, nodes[to].position, t, t_leave});
    if (t_leave > horizon) break;

    std::vector<LinkId> options;
    for (LinkId next : nodes[to].links) {
      if (next != link) options.push_back(next);
    }
    const bool can_exit = nodes[to].on_boundary;
    const std::size_t choices = options.size() + (can_exit ? 1 : 0);
    if (choices == 0) {
      options.push_back(link);  // dead end inside the grid: turn around
    }
    const std::size_t pick = rng.below(std::max<std::size_t>(choices, 1));
    if (choices > 0 && pick == options.size()) {
      w.t_exit = t_leave;
      break;
    }
    from = to;
    link = options[choices == 0 ? 0 : pick];
    t = t_leave;
  }
  return w;
}

Point position_on(const Segment& s, double t, double speed) {
  if (speed == 0.0) return s.from;
  const double len = distance(s.from, s.to);
  const double f = std::clamp((t - s.t_enter) * speed / len, 0.0, 1.0);
  return {s.from.x + (s.to.x - s.from.x) * f, s.from.y + (s.to.y - s.from.y) * f};
}

const NodeSample* find_node(const std::vector<NodeSample>& row, NodeId node) {
  auto it = std::lower_bound(row.begin(), row.end(), node,
                             [](const NodeSample& s, NodeId n) { return s.node < n; });
  return (it != row.end() && it->node == node) ? &*it : nullptr;
}

bool on_sample_grid(double t, double dt) {
  return std::abs(t / dt - std::round(t / dt)) < kTimeTol;
}

}  // namespace

std::string SpeedModel::describe() const {
  std::ostringstream os;
  if (kind == Kind::Constant) {
    os << lo_kmh;
  } else {
    os << '[' << lo_kmh << ',' << hi_kmh << ']';
  }
  return os.str();
}

SpeedModel SpeedModel::parse(const std::string& text) {
  try {
    if (!text.empty() && text.front() == '[') {
      const auto comma = text.find(',');
      if (comma == std::string::npos || text.back() != ']') throw std::invalid_argument(text);
      return uniform(std::stod(text.substr(1, comma - 1)),
                     std::stod(text.substr(comma + 1, text.size() - comma - 2)));
    }
    return constant(std::stod(text));
  } catch (const std::logic_error&) {
    throw std::invalid_argument("bad speed model '" + text + "' (expected 60 or [0,60])");
  }
}

void MobilityConfig::validate() const {
  if (!(arrival_rate >= 0.0)) throw std::invalid_argument("arrival_rate must be >= 0");
  if (!(tx_radius > 0.0)) throw std::invalid_argument("tx_radius must be > 0");
  if (!(duration > 0.0)) throw std::invalid_argument("duration must be > 0");
  if (!(sample_dt > 0.0)) throw std::invalid_argument("sample_dt must be > 0");
  if (!(warmup >= 0.0)) throw std::invalid_argument("warmup must be >= 0");
  if (!(speed.lo_kmh >= 0.0) || !(speed.hi_kmh >= speed.lo_kmh)) {
    throw std::invalid_argument("speed bounds must satisfy 0 <= lo <= hi");
  }
}

nlohmann::json to_json(const MobilityConfig& cfg) {
  return {{"arrival_rate", cfg.arrival_rate}, {"speed_model", cfg.speed.describe()},
          {"tx_radius", cfg.tx_radius},       {"duration", cfg.duration},
          {"sample_dt", cfg.sample_dt},       {"warmup", cfg.warmup},
          {"rng_seed", cfg.rng_seed}};
}

MobilityConfig mobility_config_from_json(const nlohmann::json& doc) {
  MobilityConfig cfg;
  cfg.arrival_rate = doc.value("arrival_rate", cfg.arrival_rate);
  if (doc.contains("speed_model")) cfg.speed = SpeedModel::parse(doc.at("speed_model").get<std::string>());
  cfg.tx_radius = doc.value("tx_radius", cfg.tx_radius);
  cfg.duration = doc.value("duration", cfg.duration);
  cfg.sample_dt = doc.value("sample_dt", cfg.sample_dt);
  cfg.warmup = doc.value("warmup", cfg.warmup);
  cfg.rng_seed = doc.value("rng_seed", cfg.rng_seed);
  return cfg;
}

std::size_t sample_count(double duration, double sample_dt) {
  return static_cast<std::size_t>(std::floor(duration / sample_dt + kTimeTol)) + 1;
}

ContactTrace simulate_mobility(const RoadGrid& grid, const MobilityConfig& cfg,
                               const SimulationHooks& hooks) {
  cfg.validate();
  const auto nodes = grid.intersections();

  double min_length = kInf;
  for (const auto& l : grid.links()) min_length = std::min(min_length, l.length);
  double max_speed = kmh_to_ms(std::max(cfg.speed.hi_kmh, 1.0));
  for (const auto& a : hooks.arrivals) max_speed = std::max(max_speed, kmh_to_ms(a.speed_kmh));
  if (max_speed * cfg.sample_dt >= min_length) {
    throw std::invalid_argument("sample_dt too coarse: a node could cross a whole link between samples");
  }

  const double horizon = cfg.duration;
  std::vector<Walker> walkers;

  for (std::size_t i = 0; i < hooks.pinned.size(); ++i) {
    const auto& p = hooks.pinned[i];
    const RoadLink& l = grid.link(p.link);
    const double f = std::clamp(p.offset / l.length, 0.0, 1.0);
    const Point at{l.a.x + (l.b.x - l.a.x) * f, l.a.y + (l.b.y - l.a.y) * f};
    Walker w;
    w.t_arrive = -cfg.warmup;
    w.segments.push_back({p.link, at, at, -cfg.warmup, kInf});
    w.origin = 0;
    w.seq = i;
    walkers.push_back(std::move(w));
  }

  if (cfg.arrival_rate > 0.0) {
    for (const auto& link : grid.links()) {
      if (!link.is_border) continue;
      std::vector<int> entries;
      for (int which : {0, 1}) {
        if (nodes[grid.endpoint_node(link.id, which)].on_boundary) entries.push_back(which);
      }
      if (entries.empty()) entries = {0, 1};

      Rng arrivals(derive_seed(cfg.rng_seed, 1, static_cast<std::uint64_t>(link.id)));
      double t = -cfg.warmup;
      for (std::uint64_t j = 0;; ++j) {
        t += arrivals.exponential(cfg.arrival_rate);
        if (t > horizon) break;
        Rng rng(derive_seed(cfg.rng_seed, 2, static_cast<std::uint64_t>(link.id), j));
        const int which = entries[rng.below(entries.size())];
        const double v = kmh_to_ms(draw_speed_kmh(cfg.speed, rng));
        Walker w = route(grid, link.id, grid.endpoint_node(link.id, which), t, v, horizon, rng);
        w.origin = 1;
        w.origin_link = link.id;
        w.seq = j;
        walkers.push_back(std::move(w));
      }
    }
  }

  for (std::size_t i = 0; i < hooks.arrivals.size(); ++i) {
    const auto& a = hooks.arrivals[i];
    Rng rng(derive_seed(cfg.rng_seed, 3, i));
    double kmh = a.speed_kmh > 0.0 ? a.speed_kmh : 1.0;
    Walker w = route(grid, a.link, grid.endpoint_node(a.link, a.from_endpoint), a.time,
                     kmh_to_ms(kmh), horizon, rng);
    w.origin = 1;
    w.origin_link = a.link;
    w.seq = (std::uint64_t{1} << 40) + i;
    walkers.push_back(std::move(w));
  }

  // Keep nodes observed at some sample instant, ids in order of appearance.
  const std::size_t num_samples = sample_count(cfg.duration, cfg.sample_dt);
  auto trace_time = [&](std::size_t k) { return static_cast<double>(k) * cfg.sample_dt; };
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < walkers.size(); ++i) {
    const Walker& w = walkers[i];
    auto k0 = static_cast<std::size_t>(std::max(0.0, std::ceil(w.t_arrive / cfg.sample_dt)));
    while (trace_time(k0) < w.t_arrive) ++k0;
    if (k0 < num_samples && trace_time(k0) < w.t_exit) kept.push_back(i);
  }
  std::stable_sort(kept.begin(), kept.end(), [&](std::size_t x, std::size_t y) {
    const Walker& a = walkers[x];
    const Walker& b = walkers[y];
    if (a.origin != b.origin) return a.origin < b.origin;
    if (a.t_arrive != b.t_arrive) return a.t_arrive < b.t_arrive;
    if (a.origin_link != b.origin_link) return a.origin_link < b.origin_link;
    return a.seq < b.seq;
  });

  ContactTrace trace;
  trace.sample_dt = cfg.sample_dt;
  trace.duration = cfg.duration;
  trace.tx_radius = cfg.tx_radius;
  trace.num_nodes = static_cast<NodeId>(kept.size());
  trace.config = cfg;
  trace.samples.resize(num_samples);

  std::vector<std::size_t> cursor(kept.size(), 0);
  struct Open {
    std::size_t start_k;
    std::size_t last_k;
    LinkId link_a;
    LinkId link_b;
  };
  std::map<std::pair<NodeId, NodeId>, Open> open;
  std::unordered_map<long long, std::vector<std::size_t>> cells;
  const double r = cfg.tx_radius;
  auto cell_key = [](long long cx, long long cy) { return (cx << 32) ^ (cy & 0xffffffffLL); };

  auto close = [&](const std::pair<NodeId, NodeId>& pair, const Open& o) {
    trace.contacts.push_back({pair.first, pair.second, trace.time_of(o.start_k),
                              trace.time_of(o.last_k), o.link_a, o.link_b});
  };

  for (std::size_t k = 0; k < num_samples; ++k) {
    const double s = trace.time_of(k);
    auto& row = trace.samples[k];
    for (std::size_t id = 0; id < kept.size(); ++id) {
      const Walker& w = walkers[kept[id]];
      if (s < w.t_arrive || s >= w.t_exit) continue;
      std::size_t& c = cursor[id];
      while (c + 1 < w.segments.size() && s >= w.segments[c].t_leave) ++c;
      const Segment& seg = w.segments[c];
      row.push_back({static_cast<NodeId>(id), seg.link, position_on(seg, s, w.speed), w.speed});
    }

    cells.clear();
    for (std::size_t i = 0; i < row.size(); ++i) {
      const auto cx = static_cast<long long>(std::floor(row[i].position.x / r));
      const auto cy = static_cast<long long>(std::floor(row[i].position.y / r));
      cells[cell_key(cx, cy)].push_back(i);
    }
    std::vector<std::pair<std::size_t, std::size_t>> in_range;
    for (std::size_t i = 0; i < row.size(); ++i) {
      const auto cx = static_cast<long long>(std::floor(row[i].position.x / r));
      const auto cy = static_cast<long long>(std::floor(row[i].position.y / r));
      for (long long dx = -1; dx <= 1; ++dx) {
        for (long long dy = -1; dy <= 1; ++dy) {
          auto it = cells.find(cell_key(cx + dx, cy + dy));
          if (it == cells.end()) continue;
          for (std::size_t j : it->second) {
            if (j > i && distance(row[i].position, row[j].position) <= r) in_range.emplace_back(i, j);
          }
        }
      }
    }
    for (auto [i, j] : in_range) {
      const std::pair<NodeId, NodeId> key{row[i].node, row[j].node};
      auto it = open.find(key);
      if (it != open.end() && it->second.last_k + 1 == k) {
        it->second.last_k = k;
      } else {
        open[key] = Open{k, k, row[i].link, row[j].link};
      }
    }
    for (auto it = open.begin(); it != open.end();) {
      if (it->second.last_k < k) {
        close(it->first, it->second);
        it = open.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (const auto& [pair, o] : open) close(pair, o);

  std::sort(trace.contacts.begin(), trace.contacts.end(), [](const Contact& a, const Contact& b) {
    if (a.start_time != b.start_time) return a.start_time < b.start_time;
    if (a.node_a != b.node_a) return a.node_a < b.node_a;
    return a.node_b < b.node_b;
  });
  trace.transitions = derive_transitions(trace);
  return trace;
}

std::vector<LinkTransition> derive_transitions(const ContactTrace& trace) {
  std::vector<LinkTransition> out;
  const std::vector<NodeSample> empty;
  for (std::size_t k = 0; k < trace.samples.size(); ++k) {
    const auto& now = trace.samples[k];
    const auto& before = k == 0 ? empty : trace.samples[k - 1];
    const double t = trace.time_of(k);
    std::size_t i = 0, j = 0;
    // Merge the two node-sorted rows.
    while (i < before.size() || j < now.size()) {
      if (j == now.size() || (i < before.size() && before[i].node < now[j].node)) {
        out.push_back({before[i].node, kNoLink, t});
        ++i;
      } else if (i == before.size() || now[j].node < before[i].node) {
        out.push_back({now[j].node, now[j].link, t});
        ++j;
      } else {
        if (before[i].link != now[j].link) out.push_back({now[j].node, now[j].link, t});
        ++i;
        ++j;
      }
    }
  }
  return out;
}

void validate_trace(const ContactTrace& trace) {
  auto fail = [](const std::string& msg) { throw ValidationError("invalid trace: " + msg); };
  if (!(trace.sample_dt > 0.0)) fail("sample_dt must be > 0");
  if (!(trace.duration >= 0.0)) fail("duration must be >= 0");
  if (!(trace.tx_radius > 0.0)) fail("tx_radius must be > 0");
  if (trace.samples.size() != sample_count(trace.duration, trace.sample_dt)) {
    fail("sample rows do not cover [0, duration]");
  }
  for (std::size_t k = 0; k < trace.samples.size(); ++k) {
    const auto& row = trace.samples[k];
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (row[i].node < 0 || row[i].node >= trace.num_nodes) fail("node id out of range");
      if (row[i].link < 0) fail("sample without a link");
      if (i > 0 && row[i - 1].node >= row[i].node) fail("sample rows must be sorted by node id");
    }
  }

  std::map<std::pair<NodeId, NodeId>, double> last_end;
  const Contact* prev = nullptr;
  for (const auto& c : trace.contacts) {
    if (c.node_a >= c.node_b || c.node_a < 0 || c.node_b >= trace.num_nodes) {
      fail("contact endpoints must satisfy 0 <= node_a < node_b < num_nodes");
    }
    if (!(c.end_time >= c.start_time) || c.start_time < 0.0 || c.end_time > trace.duration + kTimeTol) {
      fail("contact interval outside [0, duration] or reversed");
    }
    if (!on_sample_grid(c.start_time, trace.sample_dt) || !on_sample_grid(c.end_time, trace.sample_dt)) {
      fail("contact times must be sample instants");
    }
    if (prev && (prev->start_time > c.start_time ||
                 (prev->start_time == c.start_time &&
                  std::pair(prev->node_a, prev->node_b) >= std::pair(c.node_a, c.node_b)))) {
      fail("contacts must be sorted by (start_time, node_a, node_b) without duplicates");
    }
    prev = &c;
    const auto key = std::pair(c.node_a, c.node_b);
    if (auto it = last_end.find(key); it != last_end.end() && c.start_time <= it->second + trace.sample_dt + kTimeTol) {
      fail("overlapping or adjacent contacts for the same pair");
    }
    last_end[key] = c.end_time;

    const auto ks = static_cast<std::size_t>(std::llround(c.start_time / trace.sample_dt));
    const auto ke = static_cast<std::size_t>(std::llround(c.end_time / trace.sample_dt));
    for (std::size_t k = ks; k <= ke; ++k) {
      const NodeSample* a = find_node(trace.samples[k], c.node_a);
      const NodeSample* b = find_node(trace.samples[k], c.node_b);
      if (!a || !b) fail("contact listed while a node is absent");
      if (distance(a->position, b->position) > trace.tx_radius + kTimeTol) {
        fail("contact nodes farther apart than tx_radius");
      }
      if (k == ks && (a->link != c.link_a || b->link != c.link_b)) {
        fail("contact links do not match the samples at start_time");
      }
    }
  }

  if (trace.transitions != derive_transitions(trace)) {
    fail("link transitions inconsistent with sampled positions");
  }
}

ContactTrace inject_trace(double sample_dt, double duration, double tx_radius,
                          std::vector<std::vector<NodeSample>> samples, std::vector<Contact> contacts,
                          std::vector<LinkTransition> transitions) {
  ContactTrace trace;
  trace.sample_dt = sample_dt;
  trace.duration = duration;
  trace.tx_radius = tx_radius;
  if (sample_dt > 0.0 && duration >= 0.0) {
    const std::size_t n = sample_count(duration, sample_dt);
    if (samples.size() > n) throw ValidationError("invalid trace: more sample rows than instants");
    samples.resize(n);
  }
  NodeId max_node = -1;
  for (auto& row : samples) {
    std::sort(row.begin(), row.end(), [](const NodeSample& a, const NodeSample& b) { return a.node < b.node; });
    for (const auto& s : row) max_node = std::max(max_node, s.node);
  }
  for (auto& c : contacts) {
    if (c.node_a > c.node_b) {
      std::swap(c.node_a, c.node_b);
      std::swap(c.link_a, c.link_b);
    }
    max_node = std::max({max_node, c.node_a, c.node_b});
  }
  std::sort(contacts.begin(), contacts.end(), [](const Contact& a, const Contact& b) {
    if (a.start_time != b.start_time) return a.start_time < b.start_time;
    if (a.node_a != b.node_a) return a.node_a < b.node_a;
    return a.node_b < b.node_b;
  });
  trace.num_nodes = max_node + 1;
  trace.samples = std::move(samples);
  trace.contacts = std::move(contacts);
  if (transitions.empty()) {
    trace.transitions = derive_transitions(trace);
  } else {
    std::sort(transitions.begin(), transitions.end(), [](const LinkTransition& a, const LinkTransition& b) {
      return a.time != b.time ? a.time < b.time : a.node < b.node;
    });
    trace.transitions = std::move(transitions);
  }
  validate_trace(trace);
  return trace;
}

}  // namespace cfc
