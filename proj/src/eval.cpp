#include "trajgan/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "trajgan/error.hpp"
#include "trajgan/model.hpp"

namespace trajgan {

namespace {

double sq_dist(const Point& a, const Point& b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

void require_nonempty(std::span<const TrajectoryPair> data, const char* what) {
  if (data.empty()) throw ContractError(std::string(what) + ": empty dataset");
  for (const auto& p : data) {
    if (p.pred.empty() || p.pred.size() != p.truth.size()) {
      throw ContractError(std::string(what) + ": prediction/truth length mismatch");
    }
  }
}

}  // namespace

double rmse_trajectory(std::span<const Point> pred, std::span<const Point> truth) {
  if (pred.size() != truth.size() || pred.empty()) {
    throw ContractError("rmse: lengths " + std::to_string(pred.size()) + " and " + std::to_string(truth.size()) +
                        " must match and be non-zero");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += sq_dist(pred[i], truth[i]);
  return std::sqrt(total / static_cast<double>(pred.size()));
}

double ade(std::span<const TrajectoryPair> data) {
  require_nonempty(data, "ade");
  double total = 0.0;
  for (const auto& p : data) total += rmse_trajectory(p.pred, p.truth);
  return total / static_cast<double>(data.size());
}

double fde(std::span<const TrajectoryPair> data) {
  require_nonempty(data, "fde");
  double total = 0.0;
  for (const auto& p : data) total += sq_dist(p.pred.back(), p.truth.back());
  return std::sqrt(total / static_cast<double>(data.size()));
}

double fde_mean_abs(std::span<const TrajectoryPair> data) {
  require_nonempty(data, "fde");
  double total = 0.0;
  for (const auto& p : data) total += std::sqrt(sq_dist(p.pred.back(), p.truth.back()));
  return total / static_cast<double>(data.size());
}

EvalReport summarize(std::string name, std::size_t k, std::span<const TrajectoryPair> pairs,
                     std::span<const int> labels) {
  if (labels.size() != pairs.size()) throw ContractError("summarize: one label per trajectory required");
  EvalReport r;
  r.name = std::move(name);
  r.k = k;
  r.n_trajectories = pairs.size();
  r.ade = ade(pairs);
  r.fde = fde(pairs);
  r.fde_mean_abs = fde_mean_abs(pairs);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::vector<TrajectoryPair> subset;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (labels[i] == static_cast<int>(c)) subset.push_back(pairs[i]);
    }
    if (subset.empty()) continue;
    r.per_class[c] = {subset.size(), ade(subset), fde(subset)};
  }
  return r;
}

std::vector<std::vector<Point>> constant_velocity_baseline(const SceneWindow& window, std::size_t t_pred) {
  std::vector<std::vector<Point>> out;
  for (const auto& a : window.agents) {
    if (a.observed.size() < 2) throw ContractError("constant velocity baseline needs at least 2 observed points");
    const Point last = a.observed.back();
    const Point prev = a.observed[a.observed.size() - 2];
    const Point v{last.x - prev.x, last.y - prev.y};
    std::vector<Point> pred;
    for (std::size_t t = 1; t <= t_pred; ++t) {
      pred.push_back({last.x + static_cast<double>(t) * v.x, last.y + static_cast<double>(t) * v.y});
    }
    out.push_back(std::move(pred));
  }
  return out;
}

EvalReport eval_constant_velocity(std::span<const SceneWindow> windows) {
  std::vector<TrajectoryPair> pairs;
  std::vector<int> labels;
  for (const auto& w : windows) {
    std::size_t t_pred = w.agents.empty() ? 0 : w.agents.front().future.size();
    auto preds = constant_velocity_baseline(w, t_pred);
    for (std::size_t i = 0; i < w.agents.size(); ++i) {
      pairs.push_back({std::move(preds[i]), w.agents[i].future});
      labels.push_back(w.agents[i].label);
    }
  }
  return summarize("constant velocity", 1, pairs, labels);
}

EvalReport eval_min_of_k(const Generator& generator, std::span<const SceneWindow> windows,
                         const MinOfKOptions& options, std::string name) {
  if (options.k == 0) throw ContractError("eval: k must be >= 1");
  if (windows.empty()) throw ContractError("eval: no windows");
  NoGradGuard no_grad;
  const auto& cfg = generator.config();
  const std::size_t per_batch = std::max<std::size_t>(1, options.windows_per_batch);
  std::vector<TrajectoryPair> pairs;
  std::vector<int> labels;
  for (std::size_t start = 0, b = 0; start < windows.size(); start += per_batch, ++b) {
    const auto chunk = windows.subspan(start, std::min(per_batch, windows.size() - start));
    const Batch batch = make_batch(chunk, cfg.t_obs, cfg.t_pred);
    std::seed_seq seq{static_cast<std::uint32_t>(options.seed), static_cast<std::uint32_t>(options.seed >> 32),
                      static_cast<std::uint32_t>(b)};
    Rng rng(seq);
    const PredictionSet preds = generator.forward(batch, options.k, rng);
    const std::size_t n = batch.n_agents;
    const std::size_t width = 2 * cfg.t_pred;
    const auto flat = preds.flat.values();
    const auto truth = batch.future_flat.values();
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_err = std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < options.k; ++s) {
        double err = 0.0;
        const double* row = flat.data() + (s * n + i) * width;
        for (std::size_t j = 0; j < width; ++j) {
          const double d = row[j] - truth[i * width + j];
          err += d * d;
        }
        if (err < best_err) {
          best_err = err;
          best = s;
        }
      }
      TrajectoryPair pair;
      pair.pred = preds.trajectory(i, best);
      for (std::size_t t = 0; t < cfg.t_pred; ++t) pair.truth.push_back({truth[i * width + 2 * t], truth[i * width + 2 * t + 1]});
      pairs.push_back(std::move(pair));
      labels.push_back(batch.labels[i]);
    }
  }
  return summarize(std::move(name), options.k, pairs, labels);
}

// ---- PCA -------------------------------------------------------------------

void symmetric_eigen(std::vector<double> a, std::size_t n, std::vector<double>& values,
                     std::vector<double>& vectors) {
  if (a.size() != n * n) throw DimensionError("symmetric_eigen: matrix is not n x n");
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  auto at = [n](std::vector<double>& m, std::size_t r, std::size_t c) -> double& { return m[r * n + c]; };

  double scale_ref = 0.0;
  for (double x : a) scale_ref += x * x;
  scale_ref = std::sqrt(scale_ref);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += at(a, p, q) * at(a, p, q);
    if (std::sqrt(off) <= 1e-15 * scale_ref || off == 0.0) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = at(a, p, q);
        if (apq == 0.0) continue;
        const double theta = (at(a, q, q) - at(a, p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = at(a, k, p), akq = at(a, k, q);
          at(a, k, p) = c * akp - s * akq;
          at(a, k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = at(a, p, k), aqk = at(a, q, k);
          at(a, p, k) = c * apk - s * aqk;
          at(a, q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = at(v, k, p), vkq = at(v, k, q);
          at(v, k, p) = c * vkp - s * vkq;
          at(v, k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return a[l * n + l] > a[r * n + r]; });
  values.assign(n, 0.0);
  vectors.assign(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    values[j] = a[order[j] * n + order[j]];
    for (std::size_t i = 0; i < n; ++i) vectors[i * n + j] = v[i * n + order[j]];
  }
}

PcaResult pca_project(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw ContractError("pca: no rows");
  const std::size_t n = rows.size();
  const std::size_t d = rows.front().size();
  if (d < 2) throw ContractError("pca: need at least 2 dimensions");
  for (const auto& r : rows) {
    if (r.size() != d) throw DimensionError("pca: ragged input rows");
  }
  std::vector<double> mean_row(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) mean_row[j] += r[j] / static_cast<double>(n);
  std::vector<std::vector<double>> centred(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) centred[i][j] = rows[i][j] - mean_row[j];

  // n x n Gram form: G = Xc Xc^T.
  std::vector<double> gram(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < d; ++j) gram[i * n + k] += centred[i][j] * centred[k][j];
  std::vector<double> eigval, eigvec;
  symmetric_eigen(gram, n, eigval, eigvec);

  PcaResult out;
  out.coords.assign(n, {0.0, 0.0});
  out.directions.assign(2, std::vector<double>(d, 0.0));
  const double top = n > 0 ? std::max(eigval[0], 0.0) : 0.0;
  double trace = 0.0;
  for (std::size_t i = 0; i < n; ++i) trace += gram[i * n + i];
  if (top <= 1e-24 * std::max(1.0, trace) || top == 0.0) {
    out.zero_variance = true;
    return out;
  }
  for (std::size_t c = 0; c < 2 && c < n; ++c) {
    const double lambda = std::max(eigval[c], 0.0);
    out.variance[c] = lambda;
    if (lambda <= 1e-12 * top) continue;  // degenerate component: projection is zero
    const double root = std::sqrt(lambda);
    std::vector<double> u(d, 0.0);
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t i = 0; i < n; ++i) u[j] += centred[i][j] * eigvec[i * n + c] / root;
    double umax = 0.0;
    for (double x : u) umax = std::max(umax, std::abs(x));
    double sign = 1.0;
    for (double x : u) {
      if (std::abs(x) > 1e-9 * umax) {
        sign = x < 0.0 ? -1.0 : 1.0;
        break;
      }
    }
    for (std::size_t j = 0; j < d; ++j) out.directions[c][j] = sign * u[j];
    for (std::size_t i = 0; i < n; ++i) {
      double proj = 0.0;
      for (std::size_t j = 0; j < d; ++j) proj += centred[i][j] * out.directions[c][j];
      out.coords[i][c] = proj;
    }
  }
  return out;
}

std::vector<std::vector<double>> embedding_distances(const std::vector<std::vector<double>>& rows) {
  const std::size_t n = rows.size();
  std::vector<std::vector<double>> out(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = i + 1; k < n; ++k) {
      if (rows[i].size() != rows[k].size()) throw DimensionError("embedding_distances: ragged rows");
      double total = 0.0;
      for (std::size_t j = 0; j < rows[i].size(); ++j) {
        const double diff = rows[i][j] - rows[k][j];
        total += diff * diff;
      }
      out[i][k] = out[k][i] = std::sqrt(total);
    }
  }
  return out;
}

}  // namespace trajgan
