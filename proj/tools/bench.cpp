// Timing comparison between the optimized kernels and their serial
// reference implementations (convolution: separable + OpenMP vs direct
// windowed loop; projection: fused parallel scaling vs plain serial).
#include <chrono>
#include <cstdio>

#include "vpseg/parallel.hpp"
#include "vpseg/reference.hpp"
#include "vpseg/rng.hpp"
#include "vpseg/vpstd.hpp"

using namespace vpseg;

namespace {

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

template <typename Fn>
double time_best_of(int reps, Fn&& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const double t0 = now_ms();
    fn();
    best = std::min(best, now_ms() - t0);
  }
  return best;
}

}  // namespace

int main() {
  std::printf("threads: %d\n\n", thread_count());

  {
    const int side = 256;
    Rng rng(7);
    ScalarField f{side, side, std::vector<double>(std::size_t(side) * side)};
    for (double& v : f.values) v = rng.uniform();
    KernelSpec kernel = make_kernel(1.5);

    volatile double sink = 0.0;
    const double t_ref = time_best_of(3, [&] { sink = reference::convolve_naive(f, kernel).values[0]; });
    const double t_opt = time_best_of(3, [&] { sink = gaussian_convolve(f, kernel).values[0]; });
    (void)sink;
    std::printf("gaussian convolve %dx%d (radius %d)\n", side, side, kernel.radius);
    std::printf("  naive serial : %8.2f ms\n", t_ref);
    std::printf("  separable+omp: %8.2f ms   (%.1fx)\n\n", t_opt, t_ref / t_opt);
  }

  {
    const int side = 32, K = 3;
    Rng rng(11);
    Logits o;
    o.width = side;
    o.height = side;
    o.n_classes = K;
    o.v.resize(std::size_t(side) * side * K);
    for (double& v : o.v) v = rng.uniform(-1.0, 1.0);
    VolumeVector V;
    const double N = double(side) * side;
    V.counts = {0.5 * N, 0.3 * N, 0.2 * N};
    VPSTDConfig cfg;
    cfg.epsilon = 0.2;
    cfg.sinkhorn_tol = 1e-8;

    volatile double sink = 0.0;
    const double t_ref = time_best_of(5, [&] {
      sink = reference::entropic_volume_projection_serial(o, V, cfg).h.probs[0];
    });
    const double t_opt = time_best_of(5, [&] { sink = entropic_volume_projection(o, V, cfg).h.probs[0]; });
    (void)sink;
    std::printf("volume projection %dx%d K=%d (tol %.0e)\n", side, side, K, cfg.sinkhorn_tol);
    std::printf("  reference serial: %8.3f ms\n", t_ref);
    std::printf("  fused+omp       : %8.3f ms   (%.1fx)\n", t_opt, t_ref / t_opt);
  }
  return 0;
}
