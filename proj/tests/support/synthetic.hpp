#pragma once

#include <cmath>

#include "cfc/baselines.hpp"
#include "cfc/rng.hpp"

namespace cfc::test {

/// Inputs uniform in [0, 1)^4. Slot 0 is 10 when x0 > 0.5 and 0 otherwise;
/// slot 1 steps by two levels every 0.2 of x1; slots 2 and 3 mirror them on
/// x2 and x3. Every label is a threshold function of a single input.
inline TrainingSet threshold_separable(std::size_t n, std::uint64_t seed) {
  TrainingSet ts;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(4);
    for (double& v : x) v = rng.uniform(0.0, 1.0);
    const auto step = [](double v) { return static_cast<std::uint8_t>(2 * std::min(4, static_cast<int>(v * 5))); };
    ts.labels.push_back({static_cast<std::uint8_t>(x[0] > 0.5 ? 10 : 0), step(x[1]),
                         static_cast<std::uint8_t>(x[2] > 0.3 ? 7 : 3), step(x[3])});
    ts.inputs.push_back(std::move(x));
  }
  return ts;
}

inline TrainingSet slice(const TrainingSet& ts, std::size_t from, std::size_t to) {
  TrainingSet out;
  out.num_classes = ts.num_classes;
  out.inputs.assign(ts.inputs.begin() + from, ts.inputs.begin() + to);
  out.labels.assign(ts.labels.begin() + from, ts.labels.begin() + to);
  return out;
}

}  // namespace cfc::test
