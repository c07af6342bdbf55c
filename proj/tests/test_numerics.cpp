#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "tvq/errors.hpp"
#include "tvq/numerics.hpp"
#include "tvq/rng.hpp"
#include "tvq/tensor.hpp"

using namespace tvq;

TEST_CASE("softmax matches hand values and stays stable") {
  auto u = softmax({0.0, 0.0, 0.0});
  for (double p : u) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  // Two-way softmax has a closed form.
  auto two = softmax({std::log(3.0), 0.0});
  CHECK(two[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(two[1] == doctest::Approx(0.25).epsilon(1e-12));

  // Huge logits must not overflow thanks to max subtraction.
  auto big = softmax({1000.0, 1001.0});
  CHECK(std::isfinite(big[0]));
  double s = big[0] + big[1];
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(big[1] / big[0] == doctest::Approx(std::exp(1.0)).epsilon(1e-9));

  CHECK_THROWS_AS(softmax({}), DimensionError);
}

TEST_CASE("log_softmax equals log of softmax") {
  std::vector<double> logits = {0.3, -1.2, 2.5, 0.0};
  auto p = softmax(logits);
  auto lp = log_softmax(logits);
  REQUIRE(lp.size() == p.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(lp[i] == doctest::Approx(std::log(p[i])).epsilon(1e-12));
    sum += std::exp(lp[i]);
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("reparameterize applies the location-scale transform") {
  VariationalParams q;
  q.gamma_m = {1.0, -2.0};
  q.log_gamma_sigma = {0.0, std::log(4.0)};
  auto z = reparameterize(q, {0.5, -1.0});
  CHECK(z[0] == doctest::Approx(1.5).epsilon(1e-15));          // 1 + e^0 * 0.5
  CHECK(z[1] == doctest::Approx(-4.0).epsilon(1e-15));         // -2 + 2 * (-1)
  CHECK_THROWS_AS(reparameterize(q, {0.5}), DimensionError);
}

TEST_CASE("gaussian_kl closed-form spot values") {
  VariationalParams q;
  q.gamma_m = {0.0};
  q.log_gamma_sigma = {0.0};
  CHECK(gaussian_kl(q, {0.0}, {0.0}) == 0.0);

  // KL(N(1,1) || N(0,1)) = 0.5.
  q.gamma_m = {1.0};
  CHECK(gaussian_kl(q, {0.0}, {0.0}) == doctest::Approx(0.5).epsilon(1e-15));

  // KL(N(m, s^2) || N(0,1)) = 0.5 (s^2 + m^2 - 1 - ln s^2), per dimension.
  q.gamma_m = {2.0, -1.0};
  q.log_gamma_sigma = {std::log(0.25), std::log(3.0)};
  double expect = 0.5 * (0.25 + 4.0 - 1.0 - std::log(0.25)) + 0.5 * (3.0 + 1.0 - 1.0 - std::log(3.0));
  CHECK(gaussian_kl(q, {0.0, 0.0}, {0.0, 0.0}) == doctest::Approx(expect).epsilon(1e-14));

  // Non-negative on random draws.
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    VariationalParams r;
    std::vector<double> pm, plv;
    for (int i = 0; i < 4; ++i) {
      r.gamma_m.push_back(rng.normal());
      r.log_gamma_sigma.push_back(rng.normal());
      pm.push_back(rng.normal());
      plv.push_back(rng.normal());
    }
    CHECK(gaussian_kl(r, pm, plv) >= 0.0);
  }
}

TEST_CASE("adam_step matches a hand-stepped reference") {
  Tensor p = Tensor::from({2}, {1.0, -3.0});
  AdamState st;
  // Reference implementation, written independently of the library loop.
  double m[2] = {0, 0}, v[2] = {0, 0};
  double ref[2] = {1.0, -3.0};
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;

  Rng rng(3);
  for (int t = 1; t <= 5; ++t) {
    Tensor g({2});
    g.at(0) = rng.normal();
    g.at(1) = rng.normal();
    adam_step(p, g, st, lr);
    for (int i = 0; i < 2; ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g.at(i);
      v[i] = b2 * v[i] + (1 - b2) * g.at(i) * g.at(i);
      double mhat = m[i] / (1 - std::pow(b1, t));
      double vhat = v[i] / (1 - std::pow(b2, t));
      ref[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
    CHECK(p.at(0) == doctest::Approx(ref[0]).epsilon(1e-14));
    CHECK(p.at(1) == doctest::Approx(ref[1]).epsilon(1e-14));
  }
  CHECK(st.step == 5);

  Tensor wrong({3});
  CHECK_THROWS_AS(adam_step(p, wrong, st, lr), DimensionError);
}

TEST_CASE("first adam step moves every coordinate by exactly lr (up to eps)") {
  Tensor p = Tensor::from({3}, {0.0, 0.0, 0.0});
  Tensor g = Tensor::from({3}, {100.0, -0.5, 1e-3});
  AdamState st;
  adam_step(p, g, st, 0.05);
  // mhat/sqrt(vhat) == sign(g) on the first step regardless of magnitude.
  for (int i = 0; i < 3; ++i) {
    double expect = (g.at(i) > 0 ? -0.05 : 0.05) * std::fabs(g.at(i)) / (std::fabs(g.at(i)) + 1e-8);
    CHECK(p.at(i) == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("grad_check accepts a correct gradient and flags a corrupted one") {
  // loss = sum_i (x_i - i)^2 with exact gradient 2 (x_i - i).
  auto good = [](const std::vector<Tensor>& ps, std::vector<Tensor>* grads) {
    double loss = 0.0;
    const Tensor& x = ps[0];
    for (std::int64_t i = 0; i < x.size(); ++i) {
      double d = x.at(i) - static_cast<double>(i);
      loss += d * d;
      if (grads) (*grads)[0].at(i) = 2.0 * d;
    }
    return loss;
  };
  auto bad = [&](const std::vector<Tensor>& ps, std::vector<Tensor>* grads) {
    double loss = good(ps, grads);
    if (grads) (*grads)[0].at(1) *= 1.5;  // corrupt one coordinate
    return loss;
  };

  std::vector<Tensor> params = {Tensor::from({4}, {0.3, -1.0, 2.0, 5.0})};
  Rng rng(11);
  CHECK(grad_check(good, params, 1e-5, 16, rng) < 1e-7);
  CHECK(grad_check(bad, params, 1e-5, 16, rng) > 0.2);
  CHECK_THROWS_AS(grad_check(good, params, 1e-2, 16, rng), ParameterError);
}

TEST_CASE("kmeans_plus_plus_indices returns k distinct valid rows") {
  Tensor pts({6, 2});
  for (int i = 0; i < 6; ++i) {
    pts.at(i, 0) = 10.0 * i;
    pts.at(i, 1) = -10.0 * i;
  }
  Rng rng(5);
  for (int k = 1; k <= 6; ++k) {
    auto idx = kmeans_plus_plus_indices(pts, k, rng);
    REQUIRE(static_cast<int>(idx.size()) == k);
    std::vector<bool> seen(6, false);
    for (int i : idx) {
      REQUIRE(i >= 0);
      REQUIRE(i < 6);
      CHECK(!seen[static_cast<std::size_t>(i)]);
      seen[static_cast<std::size_t>(i)] = true;
    }
  }
  CHECK_THROWS_AS(kmeans_plus_plus_indices(pts, 7, rng), ParameterError);
}

TEST_CASE("linear_forward and its batch variant agree") {
  Rng rng(9);
  Tensor w({3, 4}), b({3});
  for (auto& v : w.values()) v = rng.normal();
  for (auto& v : b.values()) v = rng.normal();
  Tensor x({5, 4});
  for (auto& v : x.values()) v = rng.normal();

  Tensor y = linear_forward_batch(w, b, x);
  REQUIRE(y.dim(0) == 5);
  REQUIRE(y.dim(1) == 3);
  for (int r = 0; r < 5; ++r) {
    std::vector<double> row(x.row_ptr(r), x.row_ptr(r) + 4);
    std::vector<double> out;
    linear_forward(w, b, row, out);
    for (int c = 0; c < 3; ++c) CHECK(y.at(r, c) == doctest::Approx(out[static_cast<std::size_t>(c)]).epsilon(1e-13));
  }
}

TEST_CASE("rng streams are deterministic and distributions behave") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.uniform() == b.uniform());
    CHECK(a.normal() == b.normal());
  }
  Rng c(1);
  auto d = c.dirichlet(5, 0.3);
  double s = std::accumulate(d.begin(), d.end(), 0.0);
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  for (double x : d) CHECK(x >= 0.0);

  // Categorical respects the mass layout.
  int hits = 0;
  for (int i = 0; i < 2000; ++i) hits += c.categorical({0.1, 0.9}) == 1 ? 1 : 0;
  CHECK(hits > 1600);
  CHECK(hits < 2000);

  auto perm = c.permutation(10);
  std::vector<int> sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 10; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
}
