#pragma once

#include <string>
#include <vector>

#include "vpseg/vpstd.hpp"

namespace vpseg {

// Per-class intensity centroids for the Chan-Vese style data cost.
struct RegionStats {
  std::vector<double> means;

  int n_classes() const { return int(means.size()); }
  void validate() const;
};

// o_k(x_n) = -(I(x_n) - mu_k)^2: higher logit the closer the intensity.
Logits chan_vese_costs(const Image& img, const RegionStats& stats);

// Deterministic initialization: K mid-quantiles of the intensity histogram.
RegionStats init_means_from_quantiles(const Image& img, int n_classes);

struct VariationalResult {
  HardMask mask;
  SoftSegmentation soft;
  RegionStats stats;
  int outer_iters_run = 0;
  std::vector<std::string> warnings;
};

// Alternates the VP-STD solve with mean updates mu_k = <h_k, I>/<h_k, 1>.
// Stops early when the largest mean shift drops below 1e-5. A class whose
// soft mass degenerates below 1e-6 keeps its previous mean (with a warning).
VariationalResult segment_variational(const Image& img, const VolumeVector& V, const RegionStats& init,
                                      const VPSTDConfig& cfg, int outer_iters = 10);

}  // namespace vpseg
