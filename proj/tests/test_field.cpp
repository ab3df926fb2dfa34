#include <doctest.h>

#include <cmath>

#include "vpseg/field.hpp"
#include "vpseg/reference.hpp"
#include "vpseg/rng.hpp"

using namespace vpseg;

namespace {

ScalarField random_field(int w, int h, Rng& rng) {
  ScalarField f{w, h, std::vector<double>(std::size_t(w) * h)};
  for (double& v : f.values) v = rng.uniform();
  return f;
}

}  // namespace

TEST_CASE("kernel weights sum to one and respect the truncation rule") {
  KernelSpec k = make_kernel(1.5);
  CHECK(k.radius == 5);
  auto w = k.weights_1d();
  double sum = 0.0;
  for (double v : w) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  KernelSpec bad{1.5, 3};
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("convolving a constant field returns the constant") {
  KernelSpec k = make_kernel(2.0);
  ScalarField f{9, 7, std::vector<double>(63, 0.37)};
  ScalarField g = gaussian_convolve(f, k);
  for (double v : g.values) CHECK(v == doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("centered delta produces a symmetric sampled gaussian") {
  KernelSpec k = make_kernel(1.0);
  const int side = 11;
  ScalarField f{side, side, std::vector<double>(side * side, 0.0)};
  f.values[5 * side + 5] = 1.0;
  ScalarField g = gaussian_convolve(f, k);

  auto w = k.weights_1d();
  // interior of the response is the separable product of the 1D weights
  for (int dy = -k.radius; dy <= k.radius; ++dy)
    for (int dx = -k.radius; dx <= k.radius; ++dx) {
      const double expected = w[dy + k.radius] * w[dx + k.radius];
      CHECK(g.values[(5 + dy) * side + (5 + dx)] == doctest::Approx(expected).epsilon(1e-12));
    }
  // 90-degree rotation symmetry
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      CHECK(g.values[y * side + x] ==
            doctest::Approx(g.values[x * side + (side - 1 - y)]).epsilon(1e-12));
}

TEST_CASE("separable convolution matches the direct windowed oracle") {
  Rng rng(42);
  KernelSpec k = make_kernel(1.5);
  ScalarField f = random_field(8, 8, rng);
  ScalarField fast = gaussian_convolve(f, k);
  ScalarField slow = reference::convolve_naive(f, k);
  for (std::size_t i = 0; i < f.values.size(); ++i)
    CHECK(fast.values[i] == doctest::Approx(slow.values[i]).epsilon(1e-10));
}

TEST_CASE("convolution is linear and preserves the range envelope") {
  Rng rng(7);
  KernelSpec k = make_kernel(1.2);
  ScalarField f = random_field(12, 10, rng);
  ScalarField g = random_field(12, 10, rng);
  ScalarField combo{12, 10, std::vector<double>(120)};
  for (int i = 0; i < 120; ++i) combo.values[i] = 2.5 * f.values[i] - 0.7 * g.values[i];

  ScalarField cf = gaussian_convolve(f, k);
  ScalarField cg = gaussian_convolve(g, k);
  ScalarField cc = gaussian_convolve(combo, k);
  double fmin = 1e300, fmax = -1e300;
  for (double v : f.values) {
    fmin = std::min(fmin, v);
    fmax = std::max(fmax, v);
  }
  for (int i = 0; i < 120; ++i) {
    CHECK(cc.values[i] == doctest::Approx(2.5 * cf.values[i] - 0.7 * cg.values[i]).epsilon(1e-10));
    CHECK(cf.values[i] >= fmin - 1e-12);
    CHECK(cf.values[i] <= fmax + 1e-12);
  }
}

TEST_CASE("convolution adjoint satisfies the inner-product identity") {
  Rng rng(3);
  KernelSpec k = make_kernel(1.5);
  ScalarField x = random_field(7, 9, rng);
  ScalarField y = random_field(7, 9, rng);
  ScalarField ax = gaussian_convolve(x, k);
  ScalarField aty = gaussian_convolve_adjoint(y, k);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < x.values.size(); ++i) {
    lhs += ax.values[i] * y.values[i];
    rhs += x.values[i] * aty.values[i];
  }
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("class ratios: one-hot, uniform, and random column means") {
  SoftSegmentation h;
  h.width = 2;
  h.height = 2;
  h.n_classes = 3;
  h.probs = {1, 0, 0, 1, 0, 0, 1, 0, 0, 1, 0, 0};
  auto r = class_ratios(h);
  CHECK(r[0] == 1.0);
  CHECK(r[1] == 0.0);

  h.probs.assign(12, 1.0 / 3.0);
  r = class_ratios(h);
  for (double v : r) CHECK(v == doctest::Approx(1.0 / 3.0));

  // 4 pixels, K=3, hand-checked column means
  h.probs = {0.5, 0.3, 0.2, 0.1, 0.6, 0.3, 0.25, 0.25, 0.5, 0.15, 0.05, 0.8};
  r = class_ratios(h);
  CHECK(r[0] == doctest::Approx((0.5 + 0.1 + 0.25 + 0.15) / 4));
  CHECK(r[1] == doctest::Approx((0.3 + 0.6 + 0.25 + 0.05) / 4));
  CHECK(r[2] == doctest::Approx((0.2 + 0.3 + 0.5 + 0.8) / 4));
}

TEST_CASE("hard_assign argmax with deterministic tie-break") {
  SoftSegmentation h;
  h.width = 2;
  h.height = 1;
  h.n_classes = 3;
  h.probs = {0.2, 0.7, 0.1, 0.5, 0.5, 0.0};
  HardMask m = hard_assign(h);
  CHECK(m.labels[0] == 1);
  CHECK(m.labels[1] == 0);  // tie goes to the lower index
}

TEST_CASE("one_hot round trip and histogram consistency") {
  Rng rng(11);
  HardMask m;
  m.width = 6;
  m.height = 5;
  m.labels.resize(30);
  for (auto& l : m.labels) l = std::uint8_t(rng.below(4));

  SoftSegmentation h = one_hot(m, 4);
  h.validate();
  HardMask back = hard_assign(h);
  CHECK(back.labels == m.labels);

  auto hist = label_histogram(m, 4);
  auto ratios = class_ratios(h);
  for (int k = 0; k < 4; ++k) CHECK(ratios[k] * 30.0 == doctest::Approx(double(hist[k])));

  HardMask bad = m;
  bad.labels[0] = 4;
  CHECK_THROWS_AS(one_hot(bad, 4), Error);
}

TEST_CASE("one_hot of a constant mask gives a point-mass ratio") {
  HardMask m;
  m.width = 3;
  m.height = 3;
  m.labels.assign(9, 2);
  auto r = class_ratios(one_hot(m, 4));
  CHECK(r[2] == 1.0);
  CHECK(r[0] == 0.0);
}
