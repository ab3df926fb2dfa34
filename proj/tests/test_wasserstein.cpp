#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "vpseg/rng.hpp"
#include "vpseg/wasserstein.hpp"

using namespace vpseg;

namespace {

CategoricalDistribution random_dist(int K, Rng& rng) {
  CategoricalDistribution d;
  d.p.resize(K);
  double total = 0.0;
  for (int k = 0; k < K; ++k) {
    d.p[k] = rng.uniform() + 1e-3;
    total += d.p[k];
  }
  double partial = 0.0;
  for (int k = 0; k + 1 < K; ++k) {
    d.p[k] /= total;
    partial += d.p[k];
  }
  d.p[K - 1] = 1.0 - partial;
  return d;
}

std::vector<double> index_cost(int K) {
  std::vector<double> c(K * K);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) c[i * K + j] = std::abs(i - j);
  return c;
}

CategoricalDistribution delta(int K, int at) {
  CategoricalDistribution d;
  d.p.assign(K, 0.0);
  d.p[at] = 1.0;
  return d;
}

// K=2 simplex samples embedded from scalars; Euclidean distances on the
// simplex are sqrt(2) times the scalar distances.
EmpiricalDistribution embed(const std::vector<double>& xs) {
  EmpiricalDistribution e;
  for (double x : xs) e.samples.push_back({x, 1.0 - x});
  return e;
}

}  // namespace

TEST_CASE("w1_categorical basics: identity, point masses, half-shift") {
  CategoricalDistribution p = delta(3, 0), q = delta(3, 2);
  CHECK(w1_categorical(p, p) == 0.0);
  CHECK(w1_categorical(p, q) == doctest::Approx(2.0));

  CategoricalDistribution a, b;
  a.p = {0.5, 0.5, 0.0};
  b.p = {0.0, 0.5, 0.5};
  const double v = w1_categorical(a, b);
  CHECK(v == doctest::Approx(1.0));
  CHECK(v == doctest::Approx(w1_lp_oracle(a, b, index_cost(3))).epsilon(1e-12));

  CategoricalDistribution c;
  c.p = {0.5, 0.5};
  CHECK_THROWS_AS(w1_categorical(a, c), Error);
}

TEST_CASE("LP oracle basics: diagonal costs and point masses") {
  Rng rng(5);
  CategoricalDistribution p = random_dist(4, rng);
  std::vector<double> zero_diag(16, 1.0);
  for (int i = 0; i < 4; ++i) zero_diag[i * 4 + i] = 0.0;
  CHECK(w1_lp_oracle(p, p, zero_diag) == doctest::Approx(0.0).epsilon(1e-12));

  auto cost = index_cost(5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      CHECK(w1_lp_oracle(delta(5, i), delta(5, j), cost) == doctest::Approx(std::abs(i - j)));

  CategoricalDistribution big = random_dist(9, rng);
  CHECK_THROWS_AS(w1_lp_oracle(big, big, std::vector<double>(81, 0.0)), Error);
}

TEST_CASE("cdf formula equals the exact transport LP on random pairs") {
  Rng rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const int K = 2 + int(rng.below(5));
    CategoricalDistribution p = random_dist(K, rng);
    CategoricalDistribution q = random_dist(K, rng);
    CHECK(w1_categorical(p, q) == doctest::Approx(w1_lp_oracle(p, q, index_cost(K))).epsilon(1e-9));
  }
}

TEST_CASE("w1_categorical satisfies the metric axioms on random triples") {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const int K = 2 + int(rng.below(5));
    auto p = random_dist(K, rng), q = random_dist(K, rng), r = random_dist(K, rng);
    CHECK(w1_categorical(p, q) == doctest::Approx(w1_categorical(q, p)).epsilon(1e-12));
    CHECK(w1_categorical(p, p) == 0.0);
    CHECK(w1_categorical(p, r) <= w1_categorical(p, q) + w1_categorical(q, r) + 1e-9);
  }
}

TEST_CASE("w1_empirical_1d: sorted coupling and the assignment oracle") {
  CHECK(w1_empirical_1d({0.3, 0.1, 0.7}, {0.7, 0.3, 0.1}) == 0.0);
  CHECK(w1_empirical_1d({0.0}, {1.0}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(w1_empirical_1d({0.1}, {0.1, 0.2}), Error);

  // brute-force over all 120 assignments for M=5
  Rng rng(17);
  std::vector<double> xs(5), ys(5);
  for (double& v : xs) v = rng.uniform();
  for (double& v : ys) v = rng.uniform();
  std::vector<int> perm{0, 1, 2, 3, 4};
  double best = 1e300;
  do {
    double acc = 0.0;
    for (int i = 0; i < 5; ++i) acc += std::abs(xs[i] - ys[perm[i]]);
    best = std::min(best, acc / 5.0);
  } while (std::next_permutation(perm.begin(), perm.end()));
  CHECK(w1_empirical_1d(xs, ys) == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("kr estimate is zero for equal samples or a zero critic") {
  EmpiricalDistribution e = embed({0.2, 0.5, 0.9});
  LinearCritic c = make_critic(2, 0.01);
  c.weights = {0.004, -0.007};
  c.bias = 0.3;
  CHECK(kr_dual_estimate(c, e, e) == doctest::Approx(0.0));
  LinearCritic zero = make_critic(2, 0.01);
  CHECK(kr_dual_estimate(zero, embed({0.1, 0.2}), embed({0.8, 0.9})) == 0.0);
}

TEST_CASE("weak duality: clipped critics never exceed the exact W1") {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const int M = 3 + int(rng.below(6));
    std::vector<double> xs(M), ys(M);
    for (double& v : xs) v = rng.uniform();
    for (double& v : ys) v = rng.uniform();
    // exact W1 under the Euclidean metric on the K=2 simplex
    const double exact = std::sqrt(2.0) * w1_empirical_1d(xs, ys);
    LinearCritic c = make_critic(2, 0.01);
    c.weights = {rng.uniform(-0.01, 0.01), rng.uniform(-0.01, 0.01)};
    c.bias = rng.uniform(-1.0, 1.0);
    CHECK(kr_dual_estimate(c, embed(xs), embed(ys)) <= exact + 1e-9);
  }
}

TEST_CASE("critic ascent moves weights along the mean gap and stays clipped") {
  LinearCritic c = make_critic(2, 0.01);
  EmpiricalDistribution gt, pred;
  gt.samples = {{1.0, 0.0}};
  pred.samples = {{0.0, 1.0}};
  LinearCritic c1 = critic_ascent_step(c, gt, pred, 1e-3);
  CHECK(c1.weights[0] > 0.0);
  CHECK(c1.weights[1] < 0.0);

  LinearCritic saturated = c;
  saturated.weights = {0.01, -0.01};
  LinearCritic c2 = critic_ascent_step(saturated, gt, pred, 10.0);
  CHECK(c2.weights[0] == 0.01);
  CHECK(c2.weights[1] == -0.01);
  c2.validate();
}

TEST_CASE("repeated ascent reaches the clipped-linear optimum") {
  // separated sample sets: the exact W1 equals the mean gap
  std::vector<double> gt_x{0.7, 0.75, 0.8, 0.85};
  std::vector<double> pred_x{0.2, 0.25, 0.3, 0.35};
  EmpiricalDistribution gt = embed(gt_x), pred = embed(pred_x);
  LinearCritic c = make_critic(2, 0.01);
  for (int i = 0; i < 500; ++i) c = critic_ascent_step(c, gt, pred, 1e-3);
  c.validate();

  // closed form: w = clip * sign(mean gap), estimate = |w . gap| / (clip sqrt(K))
  double gap0 = 0.0;
  for (std::size_t i = 0; i < gt_x.size(); ++i) gap0 += (gt_x[i] - pred_x[i]) / double(gt_x.size());
  const double optimum = 2.0 * gap0 / std::sqrt(2.0);
  const double estimate = kr_dual_estimate(c, gt, pred);
  CHECK(estimate == doctest::Approx(optimum).epsilon(1e-6));

  // separated sets attain the exact Euclidean W1
  const double exact = std::sqrt(2.0) * w1_empirical_1d(gt_x, pred_x);
  CHECK(estimate == doctest::Approx(exact).epsilon(1e-6));
  CHECK(estimate <= exact + 1e-9);
}
