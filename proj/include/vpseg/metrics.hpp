#pragma once

#include <utility>
#include <vector>

#include "vpseg/nets.hpp"
#include "vpseg/synthdata.hpp"

namespace vpseg {

double dice(const HardMask& a, const HardMask& b, int k);
double jaccard(const HardMask& a, const HardMask& b, int k);

// (ASD, HD95): boundary pixels are class-k pixels with a 4-neighbor
// outside the class (the image border counts as outside); ASD is the mean
// of the pooled directed nearest-boundary distances, HD95 the
// nearest-rank 95th percentile of the same pool. Throws empty_region when
// either mask lacks the class; callers record the image diagonal then.
std::pair<double, double> surface_distances(const HardMask& a, const HardMask& b, int k);

struct ClassMetrics {
  double dice = 0.0;
  double jaccard = 0.0;
  double asd = 0.0;
  double hd95 = 0.0;
};

// Per-class metrics are pooled over the dataset (summed overlaps, pooled
// distance lists), which keeps jaccard == dice/(2-dice) exact per class;
// the summary row is the mean over the foreground classes.
struct MetricsReport {
  std::vector<ClassMetrics> per_class;
  ClassMetrics mean_foreground;
};

enum class VolumeSource { reg, gt, emp };

// Runs seg_forward on every sample with the chosen volume source, hard
// assigns, and aggregates. `reg` may be null unless source == reg; `v_emp`
// may be null unless source == emp.
MetricsReport evaluate(const SegNetParams& seg, const RegNetParams* reg, const VPSTDConfig& cfg,
                       const std::vector<SyntheticSample>& dataset, VolumeSource source,
                       const VolumeVector* v_emp);

// Dice-only variant of evaluate (no surface distances); used per epoch.
double validation_dice(const SegNetParams& seg, const RegNetParams* reg, const VPSTDConfig& cfg,
                       const std::vector<SyntheticSample>& dataset, VolumeSource source,
                       const VolumeVector* v_emp);

void write_metrics_csv(const MetricsReport& report, const std::string& path);

}  // namespace vpseg
