#include "vpseg/variational.hpp"

#include <algorithm>
#include <cmath>

namespace vpseg {

void RegionStats::validate() const {
  require(means.size() >= 2, ErrorKind::invalid_argument, "need at least two region means");
  for (double m : means)
    require(std::isfinite(m), ErrorKind::invalid_argument, "region means must be finite", m);
}

Logits chan_vese_costs(const Image& img, const RegionStats& stats) {
  img.validate();
  stats.validate();
  const int N = img.n_pixels();
  const int K = stats.n_classes();
  Logits o;
  o.width = img.width;
  o.height = img.height;
  o.n_classes = K;
  o.v.resize(std::size_t(N) * K);
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k) {
      const double d = img.values[n] - stats.means[k];
      o.at(n, k) = -d * d;
    }
  return o;
}

RegionStats init_means_from_quantiles(const Image& img, int n_classes) {
  img.validate();
  require(n_classes >= 2, ErrorKind::invalid_argument, "need at least two classes");
  std::vector<double> sorted = img.values;
  std::sort(sorted.begin(), sorted.end());
  RegionStats s;
  s.means.resize(n_classes);
  const std::size_t n = sorted.size();
  for (int k = 0; k < n_classes; ++k) {
    const double q = (k + 0.5) / n_classes;
    std::size_t idx = std::min(n - 1, std::size_t(q * double(n)));
    s.means[k] = sorted[idx];
  }
  return s;
}

VariationalResult segment_variational(const Image& img, const VolumeVector& V, const RegionStats& init,
                                      const VPSTDConfig& cfg, int outer_iters) {
  img.validate();
  init.validate();
  require(outer_iters >= 1, ErrorKind::invalid_argument, "outer_iters must be positive");
  const int N = img.n_pixels();
  const int K = init.n_classes();
  require(V.n_classes() == K, ErrorKind::invalid_argument, "volume vector class count mismatch");

  VariationalResult res;
  res.stats = init;
  for (int it = 1; it <= outer_iters; ++it) {
    Logits o = chan_vese_costs(img, res.stats);
    res.soft = td_regularized_solve(o, V, cfg);
    res.outer_iters_run = it;

    double max_shift = 0.0;
    for (int k = 0; k < K; ++k) {
      double mass = 0.0, weighted = 0.0;
      for (int n = 0; n < N; ++n) {
        mass += res.soft.at(n, k);
        weighted += res.soft.at(n, k) * img.values[n];
      }
      if (mass < 1e-6) {
        res.warnings.push_back("class " + std::to_string(k) + " degenerated; mean frozen");
        continue;
      }
      const double mu = weighted / mass;
      max_shift = std::max(max_shift, std::abs(mu - res.stats.means[k]));
      res.stats.means[k] = mu;
    }
    if (max_shift < 1e-5) break;
  }
  res.mask = hard_assign(res.soft);
  return res;
}

}  // namespace vpseg
