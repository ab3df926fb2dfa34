#include <cstdio>

#include "vpseg/rng.hpp"
#include "vpseg/synthdata.hpp"
#include "vpseg/trainer.hpp"
#include "vpseg/variational.hpp"
#include "vpseg/metrics.hpp"

using namespace vpseg;

int main() {
  // pretrain trace shape
  {
    SynthConfig dc;
    dc.width = 16;
    dc.height = 16;
    dc.n_classes = 2;
    dc.class_means = {0.3, 0.8};
    dc.noise_sigma = 0.08;
    dc.structures = {{0.12, 0.3}};
    dc.count = 6;
    dc.seed = 2;
    auto data = generate(dc);
    RegNetParams reg = init_reg_net({2, 3, 3, Activation::softplus}, 5);
    std::vector<double> trace;
    pretrain_regression(reg, data, 60, 0.01, &trace);
    double worst_rise = 0.0;
    for (std::size_t i = 1; i < trace.size(); ++i)
      worst_rise = std::max(worst_rise, trace[i] - trace[i - 1]);
    std::printf("pretrain: first=%.3f last=%.3f worst_rise=%.6f rel=%.2e\n", trace.front(),
                trace.back(), worst_rise, worst_rise / (trace.front() - trace.back()));
    for (int i = 0; i < 61; i += 6) std::printf("  t[%02d]=%.4f", i, trace[i]);
    std::printf("\n");
  }

  // ramp image wrong-volume tracking
  {
    const int side = 16;
    const int N = side * side;
    Image img;
    img.width = side;
    img.height = side;
    img.values.resize(N);
    for (int n = 0; n < N; ++n) img.values[n] = 0.05 + 0.9 * double(n) / double(N - 1);
    VolumeVector v;
    v.counts = {0.75 * N, 0.25 * N};
    RegionStats init = init_means_from_quantiles(img, 2);
    for (double eps : {0.02, 0.05, 0.1}) {
      VPSTDConfig cfg;
      cfg.epsilon = eps;
      cfg.lambda = 0.0;
      cfg.sinkhorn_tol = 1e-6;
      cfg.sinkhorn_max_iter = 200000;
      cfg.td_iters = 0;
      try {
        VariationalResult r = segment_variational(img, v, init, cfg);
        VolumeVector got = mask_volumes(r.mask, 2);
        std::printf("ramp eps=%.2f hard=(%g,%g) target=(%g,%g)\n", eps, got.counts[0], got.counts[1],
                    v.counts[0], v.counts[1]);
      } catch (const Error& e) {
        std::printf("ramp eps=%.2f FAILED: %s (resid %g)\n", eps, e.what(), e.value);
      }
    }
  }

  // impulse-noise dice across eps
  {
    const int side = 16;
    for (double eps : {0.05, 0.1, 0.2}) {
      Rng rng(0);
      Image img;
      img.width = side;
      img.height = side;
      img.values.resize(side * side);
      HardMask gt;
      gt.width = side;
      gt.height = side;
      gt.labels.resize(side * side);
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
          const int n = y * side + x;
          gt.labels[n] = x >= 6 ? 1 : 0;
          img.values[n] = x < 6 ? 0.2 : 0.8;
        }
      for (int n = 0; n < side * side; ++n)
        if (rng.uniform() < 0.10) img.values[n] = rng.uniform() < 0.5 ? 0.0 : 1.0;
      VolumeVector v;
      v.counts = {6.0 * side, 10.0 * side};
      VPSTDConfig cfg;
      cfg.epsilon = eps;
      cfg.lambda = 1.0;
      cfg.kernel = make_kernel(1.5);
      cfg.sinkhorn_tol = 1e-6;
      cfg.sinkhorn_max_iter = 200000;
      cfg.td_iters = 5;
      try {
        VariationalResult r = segment_variational(img, v, init_means_from_quantiles(img, 2), cfg);
        const double d = 0.5 * (dice(r.mask, gt, 0) + dice(r.mask, gt, 1));
        std::printf("impulse eps=%.2f dice=%.4f iters=%d warn=%zu\n", eps, d, r.outer_iters_run,
                    r.warnings.size());
      } catch (const Error& e) {
        std::printf("impulse eps=%.2f FAILED: %s (resid %g)\n", eps, e.what(), e.value);
      }
    }
  }

  // argmax agreement at small eps with looser tolerance
  {
    Rng rng(9);
    const int side = 12;
    Image img;
    img.width = side;
    img.height = side;
    img.values.resize(side * side);
    for (double& v : img.values) v = rng.uniform();
    RegionStats stats;
    stats.means = {0.15, 0.5, 0.85};
    Logits o = chan_vese_costs(img, stats);
    std::vector<double> counts(3, 0.0);
    std::vector<int> argmax(side * side);
    for (int n = 0; n < side * side; ++n) {
      int best = 0;
      for (int k = 1; k < 3; ++k)
        if (o.at(n, k) > o.at(n, best)) best = k;
      argmax[n] = best;
      counts[best] += 1.0;
    }
    VolumeVector V;
    V.counts = counts;
    for (double tol : {1e-6, 1e-4, 1e-3}) {
      VPSTDConfig cfg;
      cfg.epsilon = 1e-3;
      cfg.lambda = 0.0;
      cfg.sinkhorn_tol = tol;
      cfg.sinkhorn_max_iter = 100000;
      cfg.td_iters = 0;
      try {
        auto r = entropic_volume_projection(o, V, cfg);
        HardMask m = hard_assign(r.h);
        int agree = 0;
        for (int n = 0; n < side * side; ++n) agree += m.labels[n] == argmax[n];
        std::printf("argmax tol=%g agree=%.4f iters=%d\n", tol, double(agree) / (side * side),
                    r.iterations);
      } catch (const Error& e) {
        std::printf("argmax tol=%g FAILED (resid %g)\n", tol, e.value);
      }
    }
  }
  return 0;
}
