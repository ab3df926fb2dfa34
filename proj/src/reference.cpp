#include "vpseg/reference.hpp"

#include <cmath>

namespace vpseg::reference {

namespace {

int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

}  // namespace

ScalarField convolve_naive(const ScalarField& field, const KernelSpec& kernel) {
  const std::vector<double> w1 = kernel.weights_1d();
  const int r = kernel.radius;
  const int w = field.width;
  const int h = field.height;
  ScalarField out{w, h, std::vector<double>(field.values.size(), 0.0)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const double kw = w1[dy + r] * w1[dx + r];
          acc += kw * field.values[std::size_t(reflect(y + dy, h)) * w + reflect(x + dx, w)];
        }
      out.values[std::size_t(y) * w + x] = acc;
    }
  return out;
}

ProjectionResult entropic_volume_projection_serial(const Logits& o, const VolumeVector& V,
                                                   const VPSTDConfig& cfg) {
  o.validate();
  V.validate_as_target(o.n_pixels());
  const int N = o.n_pixels();
  const int K = o.n_classes;
  const double eps = cfg.epsilon;

  std::vector<double> u(K, 0.0);
  std::vector<double> h(std::size_t(N) * K);
  double resid = 0.0;
  for (int iter = 1; iter <= cfg.sinkhorn_max_iter; ++iter) {
    for (int n = 0; n < N; ++n) {
      double m = (o.at(n, 0) + u[0]) / eps;
      for (int k = 1; k < K; ++k) m = std::max(m, (o.at(n, k) + u[k]) / eps);
      double z = 0.0;
      for (int k = 0; k < K; ++k) z += std::exp((o.at(n, k) + u[k]) / eps - m);
      const double lse = m + std::log(z);
      for (int k = 0; k < K; ++k) h[std::size_t(n) * K + k] = std::exp((o.at(n, k) + u[k]) / eps - lse);
    }
    std::vector<double> S(K, 0.0);
    for (int n = 0; n < N; ++n)
      for (int k = 0; k < K; ++k) S[k] += h[std::size_t(n) * K + k];
    resid = 0.0;
    for (int k = 0; k < K; ++k) resid = std::max(resid, std::abs(S[k] - V.counts[k]));
    if (resid <= cfg.sinkhorn_tol) {
      ProjectionResult res;
      res.h.width = o.width;
      res.h.height = o.height;
      res.h.n_classes = K;
      res.h.probs = std::move(h);
      res.u.u = std::move(u);
      res.iterations = iter;
      return res;
    }
    for (int k = 0; k < K; ++k)
      u[k] += eps * (std::log(V.counts[k]) - std::log(std::max(S[k], 1e-300)));
    for (int k = K - 1; k >= 0; --k) u[k] -= u[0];
  }
  throw Error(ErrorKind::no_convergence, "serial projection did not converge", resid);
}

}  // namespace vpseg::reference
