#pragma once

// Straight-loop ADE/FDE written from the metric definitions, sharing no code
// with the library.

#include <cmath>
#include <vector>

namespace trajgan::testing {

struct LoopTrajectory {
  std::vector<double> px, py, tx, ty;
};

inline double loop_ade(const std::vector<LoopTrajectory>& data) {
  double acc = 0.0;
  for (const auto& tr : data) {
    double sq = 0.0;
    for (std::size_t t = 0; t < tr.px.size(); ++t) sq += std::pow(tr.px[t] - tr.tx[t], 2) + std::pow(tr.py[t] - tr.ty[t], 2);
    acc += std::sqrt(sq / static_cast<double>(tr.px.size()));
  }
  return acc / static_cast<double>(data.size());
}

inline double loop_fde(const std::vector<LoopTrajectory>& data) {
  double acc = 0.0;
  for (const auto& tr : data) {
    const std::size_t t = tr.px.size() - 1;
    acc += std::pow(tr.px[t] - tr.tx[t], 2) + std::pow(tr.py[t] - tr.ty[t], 2);
  }
  return std::sqrt(acc / static_cast<double>(data.size()));
}

}  // namespace trajgan::testing
