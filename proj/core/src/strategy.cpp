#include "cfc/strategy.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "cfc/errors.hpp"
#include "cfc/rng.hpp"

namespace cfc {

StrategyMatrix::StrategyMatrix(int num_links, int num_intervals, int quantization_levels)
    : links_(num_links), intervals_(num_intervals), levels_(quantization_levels) {
  if (num_links < 1 || num_intervals < 1) throw std::invalid_argument("strategy dimensions must be positive");
  if (quantization_levels == 1 || quantization_levels < 0 || quantization_levels > 256) {
    throw std::invalid_argument("quantization_levels must be 0 (off) or in [2, 256]");
  }
  a_.assign(static_cast<std::size_t>(num_links) * num_intervals, 0.0);
  b_.assign(a_.size(), 0.0);
}

StrategyMatrix StrategyMatrix::filled(int num_links, int num_intervals, double a, double b,
                                      int quantization_levels) {
  StrategyMatrix s(num_links, num_intervals, quantization_levels);
  for (LinkId l = 0; l < num_links; ++l) {
    for (int t = 0; t < num_intervals; ++t) {
      s.set(Param::Infectivity, l, t, a);
      s.set(Param::Keep, l, t, b);
    }
  }
  return s;
}

std::size_t StrategyMatrix::index(LinkId l, int t) const {
  if (l < 0 || l >= links_ || t < 0 || t >= intervals_) {
    throw std::out_of_range("strategy entry (" + std::to_string(l) + ", " + std::to_string(t) + ") out of range");
  }
  return static_cast<std::size_t>(l) * intervals_ + t;
}

void StrategyMatrix::set(Param p, LinkId l, int t, double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("strategy entries must lie in [0, 1]");
  if (quantized()) {
    const double scaled = v * max_level();
    if (std::abs(scaled - std::round(scaled)) > 1e-9) {
      throw std::invalid_argument("strategy entry " + std::to_string(v) + " is off the quantization lattice");
    }
    v = std::round(scaled) / max_level();
  }
  (p == Param::Infectivity ? a_ : b_)[index(l, t)] = v;
}

int StrategyMatrix::level(Param p, LinkId l, int t) const {
  if (!quantized()) throw std::logic_error("levels are undefined for an unquantized strategy");
  return static_cast<int>(std::lround(value(p, l, t) * max_level()));
}

void StrategyMatrix::set_level(Param p, LinkId l, int t, int level) {
  if (!quantized()) throw std::logic_error("levels are undefined for an unquantized strategy");
  if (level < 0 || level > max_level()) throw std::invalid_argument("level out of range");
  (p == Param::Infectivity ? a_ : b_)[index(l, t)] = static_cast<double>(level) / max_level();
}

std::vector<std::uint8_t> StrategyMatrix::levels() const {
  std::vector<std::uint8_t> out;
  out.reserve(2 * a_.size());
  for (Param p : {Param::Infectivity, Param::Keep}) {
    for (LinkId l = 0; l < links_; ++l) {
      for (int t = 0; t < intervals_; ++t) out.push_back(static_cast<std::uint8_t>(level(p, l, t)));
    }
  }
  return out;
}

StrategyMatrix StrategyMatrix::from_levels(int num_links, int num_intervals, int quantization_levels,
                                           const std::vector<std::uint8_t>& levels) {
  StrategyMatrix s(num_links, num_intervals, quantization_levels);
  if (levels.size() != 2 * s.a_.size()) throw std::invalid_argument("level vector has the wrong size");
  const std::size_t half = s.a_.size();
  for (std::size_t i = 0; i < half; ++i) {
    if (levels[i] > s.max_level() || levels[half + i] > s.max_level()) {
      throw std::invalid_argument("level out of range");
    }
    s.a_[i] = static_cast<double>(levels[i]) / s.max_level();
    s.b_[i] = static_cast<double>(levels[half + i]) / s.max_level();
  }
  return s;
}

std::uint64_t StrategyMatrix::hash() const {
  std::uint64_t h = derive_seed(static_cast<std::uint64_t>(links_), static_cast<std::uint64_t>(intervals_),
                                static_cast<std::uint64_t>(levels_));
  auto mix = [&h](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    h = splitmix64(h ^ bits);
  };
  for (double v : a_) mix(v);
  for (double v : b_) mix(v);
  return h;
}

bool StrategyMatrix::all_zero() const {
  for (std::size_t i = 0; i < a_.size(); ++i) {
    if (a_[i] != 0.0 || b_[i] != 0.0) return false;
  }
  return true;
}

nlohmann::json to_json(const StrategyMatrix& s) {
  nlohmann::json a = nlohmann::json::array(), b = nlohmann::json::array();
  for (LinkId l = 0; l < s.num_links(); ++l) {
    nlohmann::json ra = nlohmann::json::array(), rb = nlohmann::json::array();
    for (int t = 0; t < s.num_intervals(); ++t) {
      ra.push_back(s.a(l, t));
      rb.push_back(s.b(l, t));
    }
    a.push_back(std::move(ra));
    b.push_back(std::move(rb));
  }
  return {{"format", "cfc-strategy"}, {"version", 1},
          {"num_links", s.num_links()}, {"num_intervals", s.num_intervals()},
          {"quantization_levels", s.quantization_levels()}, {"a", std::move(a)}, {"b", std::move(b)}};
}

StrategyMatrix strategy_from_json(const nlohmann::json& doc) {
  try {
    if (doc.value("format", std::string("cfc-strategy")) != "cfc-strategy") {
      throw FormatError("not a cfc-strategy document");
    }
    const int links = doc.at("num_links").get<int>();
    const int intervals = doc.at("num_intervals").get<int>();
    StrategyMatrix s(links, intervals, doc.value("quantization_levels", kDefaultQuantization));
    const auto& a = doc.at("a");
    const auto& b = doc.at("b");
    if (a.size() != static_cast<std::size_t>(links) || b.size() != static_cast<std::size_t>(links)) {
      throw FormatError("strategy matrices must have one row per link");
    }
    for (LinkId l = 0; l < links; ++l) {
      if (a[l].size() != static_cast<std::size_t>(intervals) || b[l].size() != static_cast<std::size_t>(intervals)) {
        throw FormatError("strategy rows must have one entry per interval");
      }
      for (int t = 0; t < intervals; ++t) {
        s.set(Param::Infectivity, l, t, a[l][t].get<double>());
        s.set(Param::Keep, l, t, b[l][t].get<double>());
      }
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed strategy document: ") + e.what());
  }
}

void save_strategy(const StrategyMatrix& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(s).dump() << '\n';
}

StrategyMatrix load_strategy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  try {
    return strategy_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace cfc
