#include <doctest.h>

#include <cmath>

#include "vpseg/losses.hpp"
#include "vpseg/rng.hpp"
#include "vpseg/synthdata.hpp"

using namespace vpseg;

namespace {

SoftSegmentation make_soft(int w, int h, int K, const std::vector<double>& probs) {
  SoftSegmentation s;
  s.width = w;
  s.height = h;
  s.n_classes = K;
  s.probs = probs;
  return s;
}

HardMask make_mask(int w, int h, const std::vector<std::uint8_t>& labels) {
  HardMask m;
  m.width = w;
  m.height = h;
  m.labels = labels;
  return m;
}

}  // namespace

TEST_CASE("supervised loss: smoothed one-hot, uniform, and a hand case") {
  HardMask gt = make_mask(3, 1, {0, 1, 1});
  const double e = 1e-9;
  SoftSegmentation almost =
      make_soft(3, 1, 2, {1.0 - e, e, e, 1.0 - e, e, 1.0 - e});
  CHECK(supervised_loss(almost, gt) == doctest::Approx(0.0).epsilon(1e-8));

  SoftSegmentation uniform = make_soft(3, 1, 2, std::vector<double>(6, 0.5));
  CHECK(supervised_loss(uniform, gt) == doctest::Approx(std::log(2.0)));

  SoftSegmentation h = make_soft(3, 1, 2, {0.7, 0.3, 0.2, 0.8, 0.4, 0.6});
  const double expect = -(std::log(0.7) + std::log(0.8) + std::log(0.6)) / 3.0;
  CHECK(supervised_loss(h, gt) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(supervised_loss(h, gt) >= 0.0);

  bool clamped = false;
  SoftSegmentation zeroed = make_soft(3, 1, 2, {0.0, 1.0, 0.2, 0.8, 0.4, 0.6});
  supervised_loss(zeroed, gt, &clamped);
  CHECK(clamped);
}

TEST_CASE("supervised loss gradient matches finite differences") {
  Rng rng(3);
  HardMask gt = make_mask(2, 2, {0, 1, 2, 1});
  std::vector<double> p(12);
  for (int n = 0; n < 4; ++n) {
    double sum = 0.0;
    for (int k = 0; k < 3; ++k) {
      p[n * 3 + k] = 0.1 + rng.uniform();
      sum += p[n * 3 + k];
    }
    for (int k = 0; k < 3; ++k) p[n * 3 + k] /= sum;
  }
  SoftSegmentation h = make_soft(2, 2, 3, p);
  auto g = supervised_loss_grad(h, gt);
  for (int n = 0; n < 4; ++n)
    for (int k = 0; k < 3; ++k) {
      SoftSegmentation up = h, down = h;
      up.probs[n * 3 + k] += 1e-6;
      down.probs[n * 3 + k] -= 1e-6;
      const double fd = (supervised_loss(up, gt) - supervised_loss(down, gt)) / 2e-6;
      CHECK(g[n * 3 + k] == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("regression loss basics") {
  VolumeVector a{{3.0, 1.0}}, b{{2.0, 2.0}};
  CHECK(regression_loss(a, a) == 0.0);
  CHECK(regression_loss(a, b) == doctest::Approx(2.0));

  Rng rng(5);
  VolumeVector x{{rng.uniform(), rng.uniform(), rng.uniform()}};
  VolumeVector y{{rng.uniform(), rng.uniform(), rng.uniform()}};
  double expect = 0.0;
  for (int k = 0; k < 3; ++k) expect += (x.counts[k] - y.counts[k]) * (x.counts[k] - y.counts[k]);
  CHECK(regression_loss(x, y) == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("ratio consistency loss: zero on matching ratios, solver feasibility bound") {
  SoftSegmentation h = make_soft(2, 2, 2, {0.75, 0.25, 0.75, 0.25, 0.75, 0.25, 0.75, 0.25});
  VolumeVector v{{3.0, 1.0}};
  CHECK(ratio_consistency_loss(v, h) == doctest::Approx(0.0).epsilon(1e-12));

  // a solver output fed the same volumes is consistent up to K * tol
  Rng rng(7);
  Logits o;
  o.width = 4;
  o.height = 4;
  o.n_classes = 2;
  o.v.resize(32);
  for (double& x : o.v) x = rng.uniform(-1.0, 1.0);
  VolumeVector target{{10.0, 6.0}};
  VPSTDConfig cfg;
  cfg.epsilon = 0.4;
  cfg.lambda = 0.0;
  cfg.sinkhorn_tol = 1e-8;
  cfg.td_iters = 0;
  auto r = entropic_volume_projection(o, target, cfg);
  CHECK(ratio_consistency_loss(target, r.h) <= 2 * cfg.sinkhorn_tol);

  // mismatched pair agrees with the LP oracle
  VolumeVector other{{6.0, 10.0}};
  CategoricalDistribution p{{other.counts[0] / 16.0, other.counts[1] / 16.0}};
  CategoricalDistribution q{{class_ratios(r.h)[0], class_ratios(r.h)[1]}};
  std::vector<double> cost{0.0, 1.0, 1.0, 0.0};
  CHECK(ratio_consistency_loss(other, r.h) == doctest::Approx(w1_lp_oracle(p, q, cost)).epsilon(1e-9));
}

TEST_CASE("w1 subgradient in q matches finite differences away from kinks") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int K = 2 + int(rng.below(4));
    std::vector<double> pv(K), qv(K);
    double ps = 0.0, qs = 0.0;
    for (int k = 0; k < K; ++k) {
      pv[k] = 0.05 + rng.uniform();
      qv[k] = 0.05 + rng.uniform();
      ps += pv[k];
      qs += qv[k];
    }
    for (int k = 0; k < K; ++k) {
      pv[k] /= ps;
      qv[k] /= qs;
    }
    CategoricalDistribution p{pv}, q{qv};
    auto g = w1_categorical_subgrad_q(p, q);
    for (int j = 0; j < K; ++j) {
      // probe without renormalizing: the subgradient is of the raw formula
      CategoricalDistribution up = q, down = q;
      up.p[j] += 1e-7;
      down.p[j] -= 1e-7;
      double cp = 0.0, cu = 0.0, cd = 0.0, wu = 0.0, wd = 0.0;
      for (int k = 0; k + 1 < K; ++k) {
        cp += p.p[k];
        cu += up.p[k];
        cd += down.p[k];
        wu += std::abs(cu - cp);
        wd += std::abs(cd - cp);
      }
      CHECK(g[j] == doctest::Approx((wu - wd) / 2e-7).epsilon(1e-4));
    }
  }
}

namespace {

SyntheticSample sample_of(int side, int K, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.width = side;
  cfg.height = side;
  cfg.n_classes = K;
  cfg.class_means = {0.25, 0.75};
  cfg.noise_sigma = 0.05;
  cfg.structures = {{0.10, 0.20}};
  cfg.count = 1;
  cfg.seed = seed;
  return generate(cfg).front();
}

VPSTDConfig quick_solver() {
  VPSTDConfig cfg;
  cfg.epsilon = 0.4;
  cfg.lambda = 0.5;
  cfg.kernel = make_kernel(1.0);
  cfg.sinkhorn_tol = 1e-6;
  cfg.td_iters = 1;
  return cfg;
}

}  // namespace

TEST_CASE("seg objective collapses to the supervised mean when alpha=beta=0") {
  SyntheticSample a = sample_of(8, 2, 1), b = sample_of(8, 2, 2), u = sample_of(8, 2, 3);
  SegNetParams net = init_seg_net({2, 4, 4, Activation::softplus}, 5);
  LinearCritic critic = make_critic(2, 0.01);
  VPSTDConfig solver = quick_solver();

  std::vector<LabeledRef> labeled{{&a.image, &a.mask, &a.volumes}, {&b.image, &b.mask, &b.volumes}};
  std::vector<UnlabeledRef> unlabeled{{&u.image, &u.volumes}};

  LossWeights off{0.0, 0.0};
  std::vector<double> g1, g2;
  const double v1 = seg_objective(net, labeled, unlabeled, critic, off, solver, &g1);
  const double v2 = seg_objective(net, labeled, {}, critic, off, solver, &g2);
  CHECK(v1 == v2);   // the unlabeled part is skipped entirely
  CHECK(g1 == g2);

  double expect = 0.0;
  for (const auto& ex : labeled) {
    SoftSegmentation h = seg_forward(net, *ex.image, *ex.volumes, solver);
    expect += supervised_loss(h, *ex.mask) / 2.0;
  }
  CHECK(v1 == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("seg objective: zero critic weights kill the third term") {
  SyntheticSample a = sample_of(8, 2, 4), u = sample_of(8, 2, 5);
  SegNetParams net = init_seg_net({2, 4, 4, Activation::softplus}, 6);
  VPSTDConfig solver = quick_solver();
  std::vector<LabeledRef> labeled{{&a.image, &a.mask, &a.volumes}};
  std::vector<UnlabeledRef> unlabeled{{&u.image, &u.volumes}};

  LinearCritic zero = make_critic(2, 0.01);
  LossWeights alpha_only{0.3, 0.0};
  LossWeights both{0.3, 0.7};
  const double v_alpha = seg_objective(net, labeled, unlabeled, zero, alpha_only, solver);
  const double v_both = seg_objective(net, labeled, unlabeled, zero, both, solver);
  CHECK(v_alpha == doctest::Approx(v_both).epsilon(1e-12));
}

TEST_CASE("seg objective warns on an empty labeled batch") {
  SyntheticSample u = sample_of(8, 2, 7);
  SegNetParams net = init_seg_net({2, 4, 4, Activation::softplus}, 8);
  LinearCritic critic = make_critic(2, 0.01);
  bool warned = false;
  const double v = seg_objective(net, {}, {{&u.image, &u.volumes}}, critic, {0.5, 0.0},
                                 quick_solver(), nullptr, &warned);
  CHECK(warned);
  CHECK(v >= 0.0);
}

TEST_CASE("seg objective gradient matches finite differences") {
  SyntheticSample a = sample_of(6, 2, 9), u = sample_of(6, 2, 10);
  SegNetParams net = init_seg_net({2, 3, 3, Activation::softplus}, 12);
  LinearCritic critic = make_critic(2, 0.01);
  critic.weights = {0.01, -0.006};
  VPSTDConfig solver = quick_solver();
  solver.sinkhorn_tol = 1e-10;

  std::vector<LabeledRef> labeled{{&a.image, &a.mask, &a.volumes}};
  std::vector<UnlabeledRef> unlabeled{{&u.image, &u.volumes}};
  LossWeights w{0.5, 0.4};

  std::vector<double> analytic;
  seg_objective(net, labeled, unlabeled, critic, w, solver, &analytic);
  auto loss = [&](const std::vector<double>& theta) {
    SegNetParams n2 = net;
    n2.params.data = theta;
    return seg_objective(n2, labeled, unlabeled, critic, w, solver);
  };
  GradReport report = grad_check(loss, analytic, net.params, 2e-3);
  CHECK(report.pass);
}

TEST_CASE("critic objective basics and a hand-evaluated linear case") {
  LinearCritic c = make_critic(2, 0.05);
  std::vector<std::vector<double>> set_a{{0.3, 0.7}, {0.4, 0.6}};
  CHECK(critic_objective(c, set_a, set_a) == 0.0);

  c.weights = {0.02, -0.01};
  c.bias = 0.5;
  CHECK(critic_objective(c, set_a, set_a) == doctest::Approx(0.0).epsilon(1e-15));

  std::vector<std::vector<double>> pred{{0.8, 0.2}};
  // f(pred) - mean f(gt), f(x) = w.x + b
  const double f_pred = 0.02 * 0.8 - 0.01 * 0.2 + 0.5;
  const double f_gt = 0.5 * ((0.02 * 0.3 - 0.01 * 0.7 + 0.5) + (0.02 * 0.4 - 0.01 * 0.6 + 0.5));
  CHECK(critic_objective(c, set_a, pred) == doctest::Approx(f_pred - f_gt).epsilon(1e-12));

  CHECK_THROWS_AS(critic_objective(c, {}, pred), Error);
}
