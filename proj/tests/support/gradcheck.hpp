#pragma once

// Central finite-difference gradient checking against the autodiff tape.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "trajgan/tensor.hpp"

namespace trajgan::testing {

struct GradCheckResult {
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  double max_rel_error = 0.0;
  // |a - n| / (|a| + |n|) over the vector of checked coordinates.
  double vector_rel_error = 0.0;
  std::string worst;  // "param p index i: analytic a numeric n"
};

inline double rel_error(double a, double n) {
  const double denom = std::max(std::abs(a), std::abs(n));
  if (denom < 1e-10) return 0.0;  // both effectively zero
  return std::abs(a - n) / denom;
}

// Samples `coords` coordinates uniformly over all parameter entries. A
// coordinate whose one-sided differences disagree sits on a kink of a
// piecewise-linear op and is resampled instead of counted.
inline GradCheckResult grad_check(const std::function<Tensor()>& loss_fn, std::vector<Tensor> params,
                                  std::size_t coords, std::uint64_t seed, double h = 1e-5) {
  for (auto& p : params) p.zero_grad();
  backward(loss_fn());

  std::vector<std::size_t> offsets{0};
  for (const auto& p : params) offsets.push_back(offsets.back() + p.size());
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, offsets.back() - 1);

  GradCheckResult out;
  double diff_sq = 0.0, a_sq = 0.0, n_sq = 0.0;
  std::size_t attempts = 0;
  while (out.checked < coords && attempts < coords * 20) {
    ++attempts;
    const std::size_t flat = pick(rng);
    std::size_t p = 0;
    while (flat >= offsets[p + 1]) ++p;
    const std::size_t i = flat - offsets[p];
    auto values = params[p].mutable_values();
    const double orig = values[i];
    const double f0 = loss_fn().item();
    values[i] = orig + h;
    const double fp = loss_fn().item();
    values[i] = orig - h;
    const double fm = loss_fn().item();
    values[i] = orig;

    const double fwd = (fp - f0) / h;
    const double bwd = (f0 - fm) / h;
    if (rel_error(fwd, bwd) > 1e-2 && std::abs(fwd - bwd) > 1e-6) {
      ++out.skipped_kinks;
      continue;
    }
    const double numeric = (fp - fm) / (2.0 * h);
    const double analytic = params[p].grad()[i];
    const double err = rel_error(analytic, numeric);
    diff_sq += (analytic - numeric) * (analytic - numeric);
    a_sq += analytic * analytic;
    n_sq += numeric * numeric;
    ++out.checked;
    if (err > out.max_rel_error) {
      out.max_rel_error = err;
      out.worst = "param " + std::to_string(p) + " index " + std::to_string(i) + ": analytic " +
                  std::to_string(analytic) + " numeric " + std::to_string(numeric);
    }
  }
  const double denom = std::sqrt(a_sq) + std::sqrt(n_sq);
  out.vector_rel_error = denom < 1e-10 ? 0.0 : std::sqrt(diff_sq) / denom;
  return out;
}

inline Tensor random_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = dist(rng);
  return Tensor::from(rows, cols, std::move(v), true);
}

// Fixed random projection to a scalar, so every output entry matters.
inline Tensor project(const Tensor& y, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> w(y.size());
  for (double& x : w) x = dist(rng);
  return sum(mul(y, Tensor::from(y.rows(), y.cols(), std::move(w))));
}

}  // namespace trajgan::testing
