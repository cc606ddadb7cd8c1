#include <doctest.h>

#include <cmath>

#include "trajgan/error.hpp"
#include "trajgan/optim.hpp"

using namespace trajgan;

TEST_CASE("first Adam step moves by the learning rate") {
  Tensor w = Tensor::from(1, 1, {0.0}, true);
  Adam opt({w}, AdamOptions{0.001});
  w.mutable_grad()[0] = 1.0;
  opt.step();
  CHECK(w.item() == doctest::Approx(-0.001).epsilon(1e-6));
  CHECK(opt.steps() == 1);
  CHECK(w.grad()[0] == 0.0);
}

TEST_CASE("Adam matches a hand-rolled reference for three steps") {
  Tensor w = Tensor::from(1, 2, {0.5, -1.0}, true);
  AdamOptions o{0.01, 0.9, 0.999, 1e-8};
  Adam opt({w}, o);
  double ref[2] = {0.5, -1.0}, m[2] = {0, 0}, v[2] = {0, 0};
  const double grads[3][2] = {{0.3, -0.2}, {0.1, 0.4}, {-0.5, 0.05}};
  for (int t = 1; t <= 3; ++t) {
    for (int j = 0; j < 2; ++j) {
      w.mutable_grad()[j] = grads[t - 1][j];
      m[j] = o.beta1 * m[j] + (1 - o.beta1) * grads[t - 1][j];
      v[j] = o.beta2 * v[j] + (1 - o.beta2) * grads[t - 1][j] * grads[t - 1][j];
      const double mh = m[j] / (1 - std::pow(o.beta1, t));
      const double vh = v[j] / (1 - std::pow(o.beta2, t));
      ref[j] -= o.lr * mh / (std::sqrt(vh) + o.epsilon);
    }
    opt.step();
    CHECK(w.values()[0] == doctest::Approx(ref[0]).epsilon(1e-14));
    CHECK(w.values()[1] == doctest::Approx(ref[1]).epsilon(1e-14));
  }
}

TEST_CASE("Adam minimizes a quadratic") {
  Tensor w = Tensor::from(1, 1, {3.0}, true);
  Adam opt({w}, AdamOptions{0.05});
  for (int i = 0; i < 2000; ++i) {
    backward(mul(w, w));
    opt.step();
  }
  CHECK(std::abs(w.item()) < 1e-2);
}

TEST_CASE("state round-trips and mismatched state is rejected") {
  Tensor w = Tensor::from(1, 3, {1, 2, 3}, true);
  Adam a({w});
  w.mutable_grad()[1] = 2.0;
  a.step();
  Adam b({w});
  b.load_state(a.state());
  CHECK(b.steps() == 1);
  CHECK(b.state()[0].m == a.state()[0].m);
  CHECK_THROWS(b.load_state({}));
}

TEST_CASE("gradient clipping bounds the global norm") {
  Tensor a = Tensor::from(1, 2, {0, 0}, true);
  Tensor b = Tensor::from(1, 1, {0}, true);
  a.mutable_grad()[0] = 3.0;
  b.mutable_grad()[0] = 4.0;
  std::vector<Tensor> ps{a, b};
  CHECK(grad_norm(ps) == doctest::Approx(5.0));
  clip_grad_norm(ps, 1.0);
  CHECK(grad_norm(ps) == doctest::Approx(1.0));
  CHECK(a.grad()[0] == doctest::Approx(0.6));
}
