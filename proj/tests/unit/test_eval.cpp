#include <doctest.h>

#include <cmath>
#include <random>

#include "support/metric_oracle.hpp"
#include "support/pca_oracle.hpp"
#include "trajgan/error.hpp"
#include "trajgan/eval.hpp"
#include "trajgan/model.hpp"

using namespace trajgan;
using trajgan::testing::LoopTrajectory;

TEST_CASE("metrics match the straight-loop reference") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> n(0.0, 20.0);
  for (int instance = 0; instance < 100; ++instance) {
    const std::size_t count = 1 + instance % 9, len = 1 + instance % 12;
    std::vector<TrajectoryPair> pairs(count);
    std::vector<LoopTrajectory> loops(count);
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t t = 0; t < len; ++t) {
        const Point p{n(rng), n(rng)}, q{n(rng), n(rng)};
        pairs[i].pred.push_back(p);
        pairs[i].truth.push_back(q);
        loops[i].px.push_back(p.x);
        loops[i].py.push_back(p.y);
        loops[i].tx.push_back(q.x);
        loops[i].ty.push_back(q.y);
      }
    CHECK(std::abs(ade(pairs) - trajgan::testing::loop_ade(loops)) < 1e-12);
    CHECK(std::abs(fde(pairs) - trajgan::testing::loop_fde(loops)) < 1e-12);
  }
}

TEST_CASE("a constant (3,4) offset scores exactly 5") {
  std::vector<TrajectoryPair> pairs(3);
  for (auto& p : pairs)
    for (int t = 0; t < 12; ++t) {
      p.truth.push_back({double(t), double(-t)});
      p.pred.push_back({double(t) + 3.0, double(-t) + 4.0});
    }
  CHECK(std::abs(ade(pairs) - 5.0) < 1e-12);
  CHECK(std::abs(fde(pairs) - 5.0) < 1e-12);
  CHECK(std::abs(fde_mean_abs(pairs) - 5.0) < 1e-12);
}

TEST_CASE("metric contracts") {
  CHECK_THROWS_AS(ade({}), ContractError);
  std::vector<TrajectoryPair> bad(1);
  bad[0].pred = {{0, 0}};
  CHECK_THROWS_AS(fde(bad), ContractError);
}

TEST_CASE("per-class breakdown") {
  std::vector<TrajectoryPair> pairs(2);
  pairs[0] = {{{0, 0}}, {{3, 4}}};
  pairs[1] = {{{0, 0}}, {{0, 1}}};
  const std::vector<int> labels{cls::car, cls::pedestrian};
  const auto r = summarize("x", 1, pairs, labels);
  CHECK(r.per_class[cls::car].n == 1);
  CHECK(r.per_class[cls::car].ade == 5.0);
  CHECK(r.per_class[cls::pedestrian].ade == 1.0);
  CHECK(r.per_class[cls::bus].n == 0);
}

TEST_CASE("constant velocity is exact on jitter-free linear scenes") {
  SynthOptions so;
  const auto windows = synth_scene(SynthKind::linear, 5, {}, 12, so);
  const auto r = eval_constant_velocity(windows);
  CHECK(r.ade < 1e-9);
  CHECK(r.fde < 1e-9);
  const auto turn = eval_constant_velocity(synth_scene(SynthKind::turn, 5, {}, 12, so));
  CHECK(turn.ade > 0.1);
}

TEST_CASE("min-of-k: more samples never hurt, and results are seeded") {
  ModelConfig m;
  m.hidden_dim = 8;
  m.embed_dim = 4;
  m.class_embed_dim = 4;
  m.mlp_dim = 8;
  m.pool_dim = 4;
  const Generator gen(m);
  SynthOptions so;
  so.jitter = 0.1;
  std::vector<SceneWindow> windows;
  for (int s = 0; s < 5; ++s) {
    auto w = synth_scene(SynthKind::turn, 3, {}, 40 + s, so);
    windows.insert(windows.end(), w.begin(), w.end());
  }
  MinOfKOptions o;
  o.windows_per_batch = 2;
  o.seed = 3;
  o.k = 1;
  const auto one = eval_min_of_k(gen, windows, o);
  o.k = 20;
  const auto twenty = eval_min_of_k(gen, windows, o);
  const auto again = eval_min_of_k(gen, windows, o);
  CHECK(twenty.ade <= one.ade);
  CHECK(twenty.ade == again.ade);
  CHECK(twenty.n_trajectories == 15);
}

TEST_CASE("Jacobi eigensolver agrees with Eigen") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t dim : {2u, 5u, 9u}) {
    Eigen::MatrixXd a(dim, dim);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) a(i, j) = n(rng);
    a = (a + a.transpose()).eval();
    std::vector<double> flat(dim * dim), values, vectors;
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) flat[i * dim + j] = a(i, j);
    symmetric_eigen(flat, dim, values, vectors);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
    for (std::size_t j = 0; j < dim; ++j) CHECK(values[j] == doctest::Approx(solver.eigenvalues()(dim - 1 - j)).epsilon(1e-12));
  }
}

TEST_CASE("PCA matches the brute-force oracle") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> rows(6, std::vector<double>(3 + trial % 14));
    for (auto& r : rows)
      for (double& v : r) v = n(rng) * (1.0 + trial);
    const auto got = pca_project(rows);
    const auto want = trajgan::testing::eigen_pca(rows);
    for (std::size_t i = 0; i < 6; ++i)
      for (int c = 0; c < 2; ++c) CHECK(std::abs(got.coords[i][c] - want[i][c]) < 1e-9);
  }
}

TEST_CASE("PCA degenerate inputs") {
  const std::vector<std::vector<double>> collinear{{1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
  const auto r = pca_project(collinear);
  CHECK_FALSE(r.zero_variance);
  for (const auto& c : r.coords) CHECK(std::abs(c[1]) < 1e-12);
  CHECK(r.coords[0][0] == doctest::Approx(-1.0));

  const std::vector<std::vector<double>> same(6, std::vector<double>{1.0, 2.0, 3.0});
  const auto z = pca_project(same);
  CHECK(z.zero_variance);
  for (const auto& c : z.coords) CHECK((c[0] == 0.0 && c[1] == 0.0));
}

TEST_CASE("embedding distances are symmetric with a zero diagonal") {
  const std::vector<std::vector<double>> rows{{0, 0}, {3, 4}, {6, 8}};
  const auto d = embedding_distances(rows);
  CHECK(d[0][1] == 5.0);
  CHECK(d[2][0] == 10.0);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(d[i][i] == 0.0);
    for (std::size_t j = 0; j < 3; ++j) CHECK(d[i][j] == d[j][i]);
  }
}
