#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cfc/road_grid.hpp"

namespace cfc {

enum class Param : int { Infectivity = 0, Keep = 1 };

inline constexpr int kDefaultQuantization = 11;  // {0, 0.1, ..., 1.0}

/// Per-link, per-interval infectivity (a) and keep probability (b).
/// With quantization_levels = q >= 2 every entry is a multiple of 1/(q-1);
/// q = 0 disables the lattice.
class StrategyMatrix {
 public:
  StrategyMatrix() = default;
  StrategyMatrix(int num_links, int num_intervals, int quantization_levels = kDefaultQuantization);

  static StrategyMatrix filled(int num_links, int num_intervals, double a, double b,
                               int quantization_levels = kDefaultQuantization);

  int num_links() const { return links_; }
  int num_intervals() const { return intervals_; }
  int quantization_levels() const { return levels_; }
  bool quantized() const { return levels_ >= 2; }
  int max_level() const { return levels_ - 1; }

  double a(LinkId l, int t) const { return a_[index(l, t)]; }
  double b(LinkId l, int t) const { return b_[index(l, t)]; }
  double value(Param p, LinkId l, int t) const { return p == Param::Infectivity ? a(l, t) : b(l, t); }
  void set(Param p, LinkId l, int t, double v);

  int level(Param p, LinkId l, int t) const;
  void set_level(Param p, LinkId l, int t, int level);

  /// Level vector laid out as [param][link][interval].
  std::vector<std::uint8_t> levels() const;
  static StrategyMatrix from_levels(int num_links, int num_intervals, int quantization_levels,
                                    const std::vector<std::uint8_t>& levels);

  std::uint64_t hash() const;
  bool all_zero() const;

  friend bool operator==(const StrategyMatrix&, const StrategyMatrix&) = default;

 private:
  std::size_t index(LinkId l, int t) const;

  int links_ = 0;
  int intervals_ = 0;
  int levels_ = kDefaultQuantization;
  std::vector<double> a_;
  std::vector<double> b_;
};

nlohmann::json to_json(const StrategyMatrix& s);
StrategyMatrix strategy_from_json(const nlohmann::json& doc);
void save_strategy(const StrategyMatrix& s, const std::filesystem::path& path);
StrategyMatrix load_strategy(const std::filesystem::path& path);

}  // namespace cfc
