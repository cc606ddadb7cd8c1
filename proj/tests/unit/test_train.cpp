#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "support/gradcheck.hpp"
#include "trajgan/error.hpp"
#include "trajgan/train.hpp"

using namespace trajgan;

namespace {

ModelConfig tiny_model() {
  ModelConfig m;
  m.embed_dim = 6;
  m.class_embed_dim = 4;
  m.hidden_dim = 8;
  m.noise_dim = 3;
  m.mlp_dim = 10;
  m.pool_dim = 5;
  m.k_samples = 3;
  return m;
}

std::vector<SceneWindow> synth(SynthKind kind, std::size_t scenes, std::uint64_t seed) {
  SynthOptions so;
  so.jitter = 0.05;
  std::vector<SceneWindow> out;
  for (std::size_t s = 0; s < scenes; ++s) {
    auto w = synth_scene(kind, 2, {}, seed + s, so);
    out.insert(out.end(), w.begin(), w.end());
  }
  return out;
}

PredictionSet hand_set(std::size_t k, std::size_t n, std::size_t t_pred, std::vector<double> flat) {
  PredictionSet p;
  p.k = k;
  p.n_agents = n;
  p.t_pred = t_pred;
  p.flat = Tensor::from(k * n, 2 * t_pred, std::move(flat), true);
  return p;
}

}  // namespace

TEST_CASE("closed-form loss anchors") {
  const Tensor half = Tensor::full(7, 1, 0.5);
  CHECK(std::abs(d_loss(half, half).item() - 2.0 * std::log(2.0)) < 1e-9);
  CHECK(std::abs(g_adv_loss(half).item() - std::log(2.0)) < 1e-9);
  CHECK(d_loss(Tensor::full(3, 1, 1.0), Tensor::full(3, 1, 0.0)).item() < 1e-6);
  CHECK(g_adv_loss(Tensor::full(3, 1, 1.0)).item() < 1e-12);
}

TEST_CASE("clamped losses stay finite at the boundaries") {
  const Tensor zero = Tensor::zeros(2, 1);
  const Tensor one = Tensor::full(2, 1, 1.0);
  CHECK(std::isfinite(d_loss(zero, one).item()));
  CHECK(std::isfinite(g_adv_loss(zero).item()));
}

TEST_CASE("generator loss decreases in every score") {
  double prev = std::numeric_limits<double>::infinity();
  for (double s = 0.05; s < 1.0; s += 0.05) {
    const double v = g_adv_loss(Tensor::full(1, 1, s)).item();
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("loss gradients match finite differences") {
  std::mt19937_64 rng(4);
  const Tensor real = trajgan::testing::random_tensor(5, 1, rng, 0.05, 0.95);
  const Tensor fake = trajgan::testing::random_tensor(5, 1, rng, 0.05, 0.95);
  const auto r = trajgan::testing::grad_check([&] { return d_loss(real, fake); }, {real, fake}, 10, 1);
  CHECK(r.max_rel_error < 1e-5);
  const auto g = trajgan::testing::grad_check([&] { return g_adv_loss(fake); }, {fake}, 5, 2);
  CHECK(g.max_rel_error < 1e-5);
}

TEST_CASE("variety loss picks the closest sample") {
  SUBCASE("exact sample gives zero") {
    const Tensor truth = Tensor::from(1, 2, {1.0, 2.0});
    const auto p = hand_set(2, 1, 1, {5.0, 5.0, 1.0, 2.0});
    CHECK(variety_loss(truth, p).loss.item() == 0.0);
  }
  SUBCASE("k = 1 is the plain L2 norm") {
    const Tensor truth = Tensor::from(1, 4, {0, 0, 0, 0});
    const auto p = hand_set(1, 1, 2, {3.0, 0.0, 0.0, 4.0});
    CHECK(variety_loss(truth, p).loss.item() == doctest::Approx(5.0).epsilon(1e-15));
  }
  SUBCASE("errors 5, 2, 7 give 2 and only sample 2 learns") {
    const Tensor truth = Tensor::from(1, 2, {0.0, 0.0});
    const auto p = hand_set(3, 1, 1, {3.0, 4.0, 0.0, 2.0, 7.0, 0.0});
    auto v = variety_loss(truth, p);
    CHECK(v.loss.item() == doctest::Approx(2.0));
    CHECK(v.argmin[0] == 1);
    backward(v.loss);
    const auto g = p.flat.grad();
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);
    CHECK(g[4] == 0.0);
    CHECK(g[5] == 0.0);
    CHECK(g[3] == doctest::Approx(1.0));
  }
}

TEST_CASE("variety loss never exceeds any sample's error") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + trial % 5, agents = 1 + trial % 3, t_pred = 3;
    std::vector<double> flat(k * agents * 2 * t_pred), truth(agents * 2 * t_pred);
    for (double& v : flat) v = n(rng);
    for (double& v : truth) v = n(rng);
    const auto p = hand_set(k, agents, t_pred, flat);
    const auto v = variety_loss(Tensor::from(agents, 2 * t_pred, truth), p);
    for (std::size_t i = 0; i < agents; ++i)
      for (std::size_t s = 0; s < k; ++s) CHECK(v.per_sample.at(v.argmin[i] * agents + i, 0) <= v.per_sample.at(s * agents + i, 0));
  }
}

TEST_CASE("GAN step updates both networks in isolation") {
  const auto windows = synth(SynthKind::linear, 4, 3);
  const Batch batch = make_batch(windows, 8, 12);
  TrainConfig tc;
  TrainingSession s(tiny_model(), tc);
  const std::vector<double> g0(s.generator().params().entries()[0].second.values().begin(),
                               s.generator().params().entries()[0].second.values().end());
  const std::vector<double> d0(s.discriminator().params().entries()[0].second.values().begin(),
                               s.discriminator().params().entries()[0].second.values().end());
  Rng rng(1);
  const StepRecord rec = s.train_step_gan(batch, rng);
  CHECK(rec.frozen_grad_norm == 0.0);
  CHECK(rec.d_loss.has_value());
  CHECK(rec.g_adv.has_value());
  const auto g1 = s.generator().params().entries()[0].second.values();
  const auto d1 = s.discriminator().params().entries()[0].second.values();
  CHECK_FALSE(std::equal(g0.begin(), g0.end(), g1.begin()));
  CHECK_FALSE(std::equal(d0.begin(), d0.end(), d1.begin()));
}

TEST_CASE("noGAN step never touches the discriminator") {
  const auto windows = synth(SynthKind::linear, 2, 5);
  const Batch batch = make_batch(windows, 8, 12);
  TrainConfig tc;
  tc.mode = TrainMode::nogan;
  TrainingSession s(tiny_model(), tc);
  const auto before = s.discriminator().params().entries()[0].second.detach();
  Rng rng(2);
  const auto rec = s.train_step(batch, rng);
  CHECK_FALSE(rec.d_loss.has_value());
  CHECK_FALSE(rec.grad_norm_d.has_value());
  const auto after = s.discriminator().params().entries()[0].second.values();
  CHECK(std::equal(after.begin(), after.end(), before.values().begin()));
  CHECK(s.discriminator_optimizer().steps() == 0);
}

TEST_CASE("noGAN step reports the plain variety loss of the same draw") {
  const auto windows = synth(SynthKind::turn, 2, 8);
  const Batch batch = make_batch(windows, 8, 12);
  TrainConfig tc;
  tc.mode = TrainMode::nogan;
  const ModelConfig m = tiny_model();
  TrainingSession s(m, tc);
  Generator reference(m);
  Rng a(9), b(9);
  const double expected = variety_loss(batch.future_flat, reference.forward(batch, m.k_samples, b)).loss.item();
  CHECK(s.train_step(batch, a).variety == expected);
}

TEST_CASE("training is deterministic for a seed") {
  const auto split = split_dataset(synth(SynthKind::turn, 12, 1), 4);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 4;
  tc.seed = 17;
  TrainingSession a(tiny_model(), tc), b(tiny_model(), tc);
  const auto la = run_training(a, split);
  const auto lb = run_training(b, split);
  REQUIRE(la.steps.size() == lb.steps.size());
  for (std::size_t i = 0; i < la.steps.size(); ++i) {
    CHECK(la.steps[i].variety == lb.steps[i].variety);
    CHECK(la.steps[i].d_loss == lb.steps[i].d_loss);
  }
  REQUIRE(la.epochs.size() == 2);
  CHECK(la.epochs[1].val_ade == lb.epochs[1].val_ade);
}

TEST_CASE("zero epochs returns an empty log; empty training data is a config error") {
  TrainConfig tc;
  tc.epochs = 0;
  TrainingSession s(tiny_model(), tc);
  CHECK(run_training(s, DatasetSplit{}).steps.empty());
  tc.epochs = 1;
  TrainingSession t(tiny_model(), tc);
  CHECK_THROWS_AS(run_training(t, DatasetSplit{}), ConfigError);
}

TEST_CASE("discriminator separates trivially separable data") {
  // Real futures continue forward; fakes are frozen in place.
  const auto windows = synth(SynthKind::linear, 6, 30);
  const Batch batch = make_batch(windows, 8, 12);
  std::vector<Tensor> still(12, batch.observed.back());
  Discriminator d(tiny_model());
  AdamOptions ao;
  ao.lr = 1e-2;
  Adam opt(d.params().tensors(), ao);
  double first = 0.0, last = 0.0;
  for (int i = 0; i < 150; ++i) {
    d.params().zero_grad();
    const Tensor loss = d_loss(d.score(join_trajectory(batch.observed, batch.future), batch.one_hot).prob,
                               d.score(join_trajectory(batch.observed, still), batch.one_hot).prob);
    if (i == 0) first = loss.item();
    last = loss.item();
    backward(loss);
    opt.step();
  }
  CHECK(last < 0.5 * first);
  const auto real = d.score(join_trajectory(batch.observed, batch.future), batch.one_hot);
  const auto fake = d.score(join_trajectory(batch.observed, still), batch.one_hot);
  CHECK(real.prob.at(0, 0) > fake.prob.at(0, 0));
}

TEST_CASE("non-finite losses abort with gradient norms") {
  auto windows = synth(SynthKind::linear, 1, 2);
  windows[0].agents[0].future[3].x = std::numeric_limits<double>::quiet_NaN();
  const Batch batch = make_batch(windows, 8, 12);
  TrainConfig tc;
  tc.mode = TrainMode::nogan;
  TrainingSession s(tiny_model(), tc);
  Rng rng(1);
  try {
    s.train_step(batch, rng);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("grad norms") != std::string::npos);
  }
}

TEST_CASE("training log CSV columns") {
  TrainLog log;
  log.steps.push_back(StepRecord{0, 0, std::nullopt, std::nullopt, 1.5, 0.25, std::nullopt, 0.0, 0.01});
  std::ostringstream os;
  log.write_steps_csv(os);
  CHECK(os.str().rfind("step,epoch,d_loss,g_adv,variety,grad_norm_g,grad_norm_d,seconds\n", 0) == 0);
  CHECK(os.str().find("0,0,,,1.5,0.25,,0.01") != std::string::npos);
}
