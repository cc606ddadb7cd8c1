#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "support/gradcheck.hpp"
#include "trajgan/error.hpp"
#include "trajgan/model.hpp"
#include "trajgan/train.hpp"

using namespace trajgan;

namespace {

ModelConfig small_config(EncoderKind enc = EncoderKind::lstm) {
  ModelConfig m;
  m.encoder = enc;
  m.embed_dim = 6;
  m.class_embed_dim = 4;
  m.hidden_dim = 8;
  m.noise_dim = 3;
  m.mlp_dim = 10;
  m.pool_dim = 5;
  m.ff_dim = 12;
  m.transformer_heads = 2;
  m.transformer_layers = 2;
  m.k_samples = 4;
  return m;
}

SceneWindow random_window(std::mt19937_64& rng, std::size_t agents) {
  std::normal_distribution<double> n(0.0, 3.0);
  std::uniform_int_distribution<int> label(0, 5);
  SceneWindow w;
  w.scene_id = "r";
  for (std::size_t a = 0; a < agents; ++a) {
    WindowAgent ag;
    ag.agent_id = static_cast<std::int64_t>(a);
    ag.label = label(rng);
    Point p{n(rng), n(rng)};
    const Point v{n(rng) / 3.0, n(rng) / 3.0};
    for (int t = 0; t < 20; ++t) {
      p = {p.x + v.x + 0.1 * n(rng), p.y + v.y + 0.1 * n(rng)};
      (t < 8 ? ag.observed : ag.future).push_back(p);
    }
    w.agents.push_back(ag);
  }
  return w;
}

void zero(Tensor t) {
  for (double& v : t.mutable_values()) v = 0.0;
}

}  // namespace

TEST_CASE("embedding contract") {
  ModelConfig m = small_config();
  Rng rng(1);
  ParamSet ps;
  SequenceEncoder enc(ps, "e", m, rng);
  const Tensor xy = Tensor::from(2, 2, {1.0, 2.0, 1.0, 2.0});
  std::vector<double> oh(12, 0.0);
  oh[cls::pedestrian] = 1.0;
  oh[6 + cls::car] = 1.0;
  const Tensor one_hot = Tensor::from(2, 6, oh);

  const Tensor e = enc.embed(xy, one_hot);
  CHECK(e.cols() == m.embed_dim + m.class_embed_dim);
  bool differs = false;
  for (std::size_t c = 0; c < e.cols(); ++c) differs |= e.at(0, c) != e.at(1, c);
  CHECK(differs);

  CHECK_THROWS_AS(enc.embed(Tensor::zeros(2, 3), one_hot), ConfigError);

  for (const auto& [name, t] : ps.entries()) zero(t);
  const Tensor z = enc.embed(xy, one_hot);
  for (double v : z.values()) CHECK(v == 0.0);

  ModelConfig plain = m;
  plain.use_labels = false;
  ParamSet ps2;
  Rng rng2(1);
  SequenceEncoder enc2(ps2, "e", plain, rng2);
  CHECK(enc2.embed(xy, one_hot).cols() == m.embed_dim);
}

TEST_CASE("LSTM single step matches a hand computation") {
  ParamSet ps;
  Rng rng(4);
  LstmCell cell(ps, "c", 1, 2, rng);
  const auto wi = cell.w_input.values();
  const auto wh = cell.w_hidden.values();
  const auto b = cell.bias.values();
  const double x = 0.7;
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  double h[2], c[2];
  for (int j = 0; j < 2; ++j) {
    const double gi = wi[0 * 8 + 0 + j] * x + b[0 + j];
    const double gf = wi[2 + j] * x + b[2 + j];
    const double gg = wi[4 + j] * x + b[4 + j];
    const double go = wi[6 + j] * x + b[6 + j];
    c[j] = sig(gf) * 0.0 + sig(gi) * std::tanh(gg);
    h[j] = sig(go) * std::tanh(c[j]);
  }
  (void)wh;
  const LstmState s = cell.step(Tensor::from(1, 1, {x}), cell.zero_state(1));
  CHECK(s.h.at(0, 0) == doctest::Approx(h[0]).epsilon(1e-14));
  CHECK(s.h.at(0, 1) == doctest::Approx(h[1]).epsilon(1e-14));
  CHECK(s.c.at(0, 1) == doctest::Approx(c[1]).epsilon(1e-14));

  for (const auto& [name, t] : ps.entries()) zero(t);
  LstmState z = cell.zero_state(1);
  for (int i = 0; i < 8; ++i) z = cell.step(Tensor::from(1, 1, {1.5}), z);
  CHECK(z.h.at(0, 0) == 0.0);
}

TEST_CASE("attention rows are distributions; single token attends to itself") {
  ParamSet ps;
  Rng rng(2);
  MultiHeadAttention mha(ps, "a", 8, 2, rng);
  std::mt19937_64 g(3);
  const Tensor x = trajgan::testing::random_tensor(3 * 5, 8, g);
  std::vector<Tensor> weights;
  mha(x, 5, &weights);
  REQUIRE(weights.size() == 2);
  for (const auto& w : weights)
    for (std::size_t r = 0; r < w.rows(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < w.cols(); ++c) s += w.at(r, c);
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }

  const Tensor one = trajgan::testing::random_tensor(4, 8, g);
  const Tensor y = mha(one, 1, &weights);
  for (const auto& w : weights) CHECK(w.at(0, 0) == 1.0);
  const Tensor expected = mha.output(mha.value(one));
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y.values()[i] == doctest::Approx(expected.values()[i]).epsilon(1e-14));
}

TEST_CASE("transformer output depends on position order") {
  ModelConfig m = small_config(EncoderKind::transformer);
  Rng rng(5);
  ParamSet ps;
  SequenceEncoder enc(ps, "t", m, rng);
  std::mt19937_64 g(6);
  const Tensor e = trajgan::testing::random_tensor(8, enc.embedding_dim(), g);
  std::vector<std::size_t> rev(8);
  for (std::size_t i = 0; i < 8; ++i) rev[i] = 7 - i;
  const Tensor a = enc.transformer_encode(e, 8);
  const Tensor b = enc.transformer_encode(gather_rows(e, rev), 8);
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += std::abs(a.values()[i] - b.values()[i]);
  CHECK(diff > 1e-6);
  CHECK(a.cols() == m.hidden_dim);
}

TEST_CASE("transformer config must divide hidden by heads") {
  ModelConfig m = small_config(EncoderKind::transformer);
  m.transformer_heads = 3;
  CHECK_THROWS_AS(m.validate(), ConfigError);
}

TEST_CASE("pooling") {
  std::mt19937_64 g(8);
  const ModelConfig m = small_config();
  Generator gen(m);

  SUBCASE("single agent gets zeros") {
    const SceneWindow w = random_window(g, 1);
    const Batch b = make_batch(std::span(&w, 1), 8, 12);
    const Tensor p = gen.pool(b, gen.encode(b));
    for (double v : p.values()) CHECK(v == 0.0);
  }
  SUBCASE("identical agents pool identically") {
    SceneWindow w = random_window(g, 1);
    w.agents.push_back(w.agents[0]);
    const Batch b = make_batch(std::span(&w, 1), 8, 12);
    const Tensor p = gen.pool(b, gen.encode(b));
    for (std::size_t c = 0; c < p.cols(); ++c) CHECK(p.at(0, c) == p.at(1, c));
  }
  SUBCASE("permuting neighbours leaves P bit-identical") {
    const SceneWindow w = random_window(g, 5);
    SceneWindow perm = w;
    std::vector<std::size_t> order{0, 4, 2, 1, 3};
    for (std::size_t i = 0; i < 5; ++i) perm.agents[i] = w.agents[order[i]];
    const Batch b1 = make_batch(std::span(&w, 1), 8, 12);
    const Batch b2 = make_batch(std::span(&perm, 1), 8, 12);
    const Tensor p1 = gen.pool(b1, gen.encode(b1));
    const Tensor p2 = gen.pool(b2, gen.encode(b2));
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t c = 0; c < p1.cols(); ++c) CHECK(p2.at(i, c) == p1.at(order[i], c));
  }
}

TEST_CASE("generator sampling contract") {
  std::mt19937_64 g(10);
  for (EncoderKind enc : {EncoderKind::lstm, EncoderKind::transformer}) {
    const ModelConfig m = small_config(enc);
    Generator gen(m);
    const SceneWindow w = random_window(g, 3);
    const Batch b = make_batch(std::span(&w, 1), 8, 12);

    const PredictionSet one = gen.forward_with_noise(b, Tensor::zeros(3, m.noise_dim), 1);
    const PredictionSet again = gen.forward_with_noise(b, Tensor::zeros(3, m.noise_dim), 1);
    CHECK(one.k == 1);
    CHECK(one.steps.size() == 12);
    CHECK(one.flat.rows() == 3);
    CHECK(one.flat.cols() == 24);
    for (std::size_t i = 0; i < one.flat.size(); ++i) CHECK(one.flat.values()[i] == again.flat.values()[i]);

    Rng rng(3);
    const PredictionSet many = gen.forward(b, 20, rng);
    CHECK(many.k == 20);
    CHECK(many.flat.rows() == 60);
    CHECK(many.trajectory(2, 19).size() == 12);
    double spread = 0.0;
    for (std::size_t c = 0; c < 24; ++c) spread += std::abs(many.flat.at(0, c) - many.flat.at(3, c));
    CHECK(spread > 1e-9);

    std::vector<std::size_t> same(3 * 5);
    for (std::size_t r = 0; r < same.size(); ++r) same[r] = r % 3;
    const Tensor z = gather_rows(draw_noise(1, 3, m.noise_dim, rng), same);
    const PredictionSet tied = gen.forward_with_noise(b, z, 5);
    for (std::size_t s = 1; s < 5; ++s)
      for (std::size_t c = 0; c < 24; ++c) CHECK(tied.flat.at(s * 3 + 1, c) == tied.flat.at(1, c));
  }
}

TEST_CASE("larger k contains the k=1 draw") {
  const ModelConfig m = small_config();
  Rng a(9), b(9);
  const Tensor z1 = draw_noise(1, 4, m.noise_dim, a);
  const Tensor z20 = draw_noise(20, 4, m.noise_dim, b);
  for (std::size_t i = 0; i < z1.size(); ++i) CHECK(z1.values()[i] == z20.values()[i]);
}

TEST_CASE("discriminator contract") {
  std::mt19937_64 g(12);
  const ModelConfig m = small_config();
  Discriminator d(m);
  const SceneWindow w = random_window(g, 4);
  const Batch b = make_batch(std::span(&w, 1), 8, 12);
  const auto out = d.score(join_trajectory(b.observed, b.future), b.one_hot);
  for (double p : out.prob.values()) {
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
  CHECK_THROWS_AS(d.score(b.observed, b.one_hot), ContractError);
  zero(d.classifier_output().weight);
  zero(d.classifier_output().bias);
  const auto flat = d.score(join_trajectory(b.observed, b.future), b.one_hot);
  for (double p : flat.prob.values()) CHECK(p == 0.5);
}

TEST_CASE("class embedding matrix and label ablation") {
  ModelConfig m = small_config();
  Generator gen(m);
  const auto rows = class_embedding_matrix(gen);
  REQUIRE(rows.size() == 6);
  const auto& ce = gen.encoder().class_embedding();
  for (std::size_t c = 0; c < 6; ++c) {
    REQUIRE(rows[c].size() == m.class_embed_dim);
    const Tensor e = ce(Tensor::from(1, 6, [&] {
      std::vector<double> v(6, 0.0);
      v[c] = 1.0;
      return v;
    }()));
    for (std::size_t j = 0; j < m.class_embed_dim; ++j) CHECK(rows[c][j] == doctest::Approx(e.at(0, j)).epsilon(1e-15));
  }
  ModelConfig plain = m;
  plain.use_labels = false;
  Generator gen2(plain);
  CHECK(gen2.params().scalar_count() < gen.params().scalar_count());
  CHECK_THROWS_AS(class_embedding_matrix(gen2), UnavailableError);
}

TEST_CASE("one encoder parameter set is shared by all classes") {
  Generator gen(small_config());
  for (const auto& [name, t] : gen.params().entries()) {
    for (std::string_view c : kClassNames) CHECK(name.find(std::string(c)) == std::string::npos);
  }
}

TEST_CASE("variety loss reaches every generator parameter") {
  std::mt19937_64 g(14);
  for (EncoderKind enc : {EncoderKind::lstm, EncoderKind::transformer}) {
    const ModelConfig m = small_config(enc);
    Generator gen(m);
    const SceneWindow w = random_window(g, 3);
    const Batch b = make_batch(std::span(&w, 1), 8, 12);
    Rng rng(1);
    gen.params().zero_grad();
    backward(variety_loss(b.future_flat, gen.forward(b, 2, rng)).loss);
    for (const auto& [name, t] : gen.params().entries()) {
      double norm = 0.0;
      for (double v : t.grad()) norm += v * v;
      INFO(name);
      CHECK(norm > 0.0);
    }
  }
}

TEST_CASE("both encoders emit hidden_dim features") {
  std::mt19937_64 g(16);
  const SceneWindow w = random_window(g, 2);
  const Batch b = make_batch(std::span(&w, 1), 8, 12);
  const Generator l(small_config(EncoderKind::lstm));
  const Generator t(small_config(EncoderKind::transformer));
  CHECK(l.encode(b).cols() == t.encode(b).cols());
}
