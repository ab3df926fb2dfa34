#include "vpseg/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "vpseg/io.hpp"

namespace vpseg {

namespace {

struct OverlapCounts {
  long long intersection = 0;
  long long size_a = 0;
  long long size_b = 0;
};

OverlapCounts overlap(const HardMask& a, const HardMask& b, int k) {
  require(a.n_pixels() == b.n_pixels(), ErrorKind::invalid_argument, "mask size mismatch");
  OverlapCounts c;
  for (int n = 0; n < a.n_pixels(); ++n) {
    const bool in_a = a.labels[n] == k;
    const bool in_b = b.labels[n] == k;
    c.intersection += in_a && in_b;
    c.size_a += in_a;
    c.size_b += in_b;
  }
  return c;
}

std::vector<std::pair<int, int>> boundary_pixels(const HardMask& m, int k) {
  std::vector<std::pair<int, int>> out;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      if (m.at(x, y) != k) continue;
      const bool edge = x == 0 || x == m.width - 1 || y == 0 || y == m.height - 1 ||
                        m.at(x - 1, y) != k || m.at(x + 1, y) != k || m.at(x, y - 1) != k ||
                        m.at(x, y + 1) != k;
      if (edge) out.emplace_back(x, y);
    }
  return out;
}

void directed_distances(const std::vector<std::pair<int, int>>& from,
                        const std::vector<std::pair<int, int>>& to, std::vector<double>& pool) {
  for (const auto& p : from) {
    double best = 1e300;
    for (const auto& q : to) {
      const double dx = p.first - q.first;
      const double dy = p.second - q.second;
      best = std::min(best, dx * dx + dy * dy);
    }
    pool.push_back(std::sqrt(best));
  }
}

double nearest_rank_percentile(std::vector<double> values, double pct) {
  require(!values.empty(), ErrorKind::invalid_argument, "empty distance pool");
  std::sort(values.begin(), values.end());
  const std::size_t rank = std::size_t(std::ceil(pct / 100.0 * double(values.size())));
  return values[std::max<std::size_t>(rank, 1) - 1];
}

}  // namespace

double dice(const HardMask& a, const HardMask& b, int k) {
  OverlapCounts c = overlap(a, b, k);
  if (c.size_a + c.size_b == 0) return 1.0;
  return 2.0 * double(c.intersection) / double(c.size_a + c.size_b);
}

double jaccard(const HardMask& a, const HardMask& b, int k) {
  OverlapCounts c = overlap(a, b, k);
  const long long uni = c.size_a + c.size_b - c.intersection;
  if (uni == 0) return 1.0;
  return double(c.intersection) / double(uni);
}

std::pair<double, double> surface_distances(const HardMask& a, const HardMask& b, int k) {
  auto ba = boundary_pixels(a, k);
  auto bb = boundary_pixels(b, k);
  require(!ba.empty() && !bb.empty(), ErrorKind::empty_region,
          "surface distance undefined for an empty class; record the image diagonal", double(k));
  std::vector<double> ab, rev;
  directed_distances(ba, bb, ab);
  directed_distances(bb, ba, rev);
  // per-direction sums first, so the mean is exactly symmetric in (a, b)
  double sum_ab = 0.0, sum_rev = 0.0;
  for (double d : ab) sum_ab += d;
  for (double d : rev) sum_rev += d;
  std::vector<double> pool = ab;
  pool.insert(pool.end(), rev.begin(), rev.end());
  return {(sum_ab + sum_rev) / double(pool.size()), nearest_rank_percentile(pool, 95.0)};
}

namespace {

VolumeVector resolve_volumes(const SyntheticSample& s, const RegNetParams* reg, VolumeSource source,
                             const VolumeVector* v_emp) {
  switch (source) {
    case VolumeSource::gt:
      return s.volumes;
    case VolumeSource::emp:
      require(v_emp != nullptr, ErrorKind::invalid_argument, "emp volume source needs V_emp");
      return *v_emp;
    case VolumeSource::reg:
    default:
      require(reg != nullptr, ErrorKind::invalid_argument, "reg volume source needs the regressor");
      return reg_forward(*reg, s.image);
  }
}

}  // namespace

MetricsReport evaluate(const SegNetParams& seg, const RegNetParams* reg, const VPSTDConfig& cfg,
                       const std::vector<SyntheticSample>& dataset, VolumeSource source,
                       const VolumeVector* v_emp) {
  require(!dataset.empty(), ErrorKind::invalid_argument, "empty evaluation dataset");
  const int K = seg.cfg.n_classes;
  std::vector<OverlapCounts> counts(K);
  std::vector<std::vector<double>> pools(K);

  for (const auto& sample : dataset) {
    VolumeVector v = resolve_volumes(sample, reg, source, v_emp);
    SoftSegmentation h = seg_forward(seg, sample.image, v, cfg);
    HardMask pred = hard_assign(h);
    const double diagonal = std::hypot(double(sample.image.width), double(sample.image.height));
    for (int k = 0; k < K; ++k) {
      OverlapCounts c = overlap(pred, sample.mask, k);
      counts[k].intersection += c.intersection;
      counts[k].size_a += c.size_a;
      counts[k].size_b += c.size_b;
      if (c.size_a == 0 && c.size_b == 0) continue;  // absent on both sides: neutral
      if (c.size_a == 0 || c.size_b == 0) {
        pools[k].push_back(diagonal);  // worst-case sentinel per surface_distances' contract
        continue;
      }
      auto ba = boundary_pixels(pred, k);
      auto bb = boundary_pixels(sample.mask, k);
      directed_distances(ba, bb, pools[k]);
      directed_distances(bb, ba, pools[k]);
    }
  }

  MetricsReport report;
  report.per_class.resize(K);
  for (int k = 0; k < K; ++k) {
    ClassMetrics& m = report.per_class[k];
    if (counts[k].size_a + counts[k].size_b == 0) {
      m.dice = 1.0;
      m.jaccard = 1.0;
    } else {
      m.dice = 2.0 * double(counts[k].intersection) / double(counts[k].size_a + counts[k].size_b);
      const long long uni = counts[k].size_a + counts[k].size_b - counts[k].intersection;
      m.jaccard = double(counts[k].intersection) / double(uni);
    }
    if (!pools[k].empty()) {
      double sum = 0.0;
      for (double d : pools[k]) sum += d;
      m.asd = sum / double(pools[k].size());
      m.hd95 = nearest_rank_percentile(pools[k], 95.0);
    }
  }
  ClassMetrics& mf = report.mean_foreground;
  for (int k = 1; k < K; ++k) {
    mf.dice += report.per_class[k].dice / double(K - 1);
    mf.jaccard += report.per_class[k].jaccard / double(K - 1);
    mf.asd += report.per_class[k].asd / double(K - 1);
    mf.hd95 += report.per_class[k].hd95 / double(K - 1);
  }
  return report;
}

double validation_dice(const SegNetParams& seg, const RegNetParams* reg, const VPSTDConfig& cfg,
                       const std::vector<SyntheticSample>& dataset, VolumeSource source,
                       const VolumeVector* v_emp) {
  require(!dataset.empty(), ErrorKind::invalid_argument, "empty validation dataset");
  const int K = seg.cfg.n_classes;
  std::vector<OverlapCounts> counts(K);
  for (const auto& sample : dataset) {
    VolumeVector v = resolve_volumes(sample, reg, source, v_emp);
    SoftSegmentation h = seg_forward(seg, sample.image, v, cfg);
    HardMask pred = hard_assign(h);
    for (int k = 1; k < K; ++k) {
      OverlapCounts c = overlap(pred, sample.mask, k);
      counts[k].intersection += c.intersection;
      counts[k].size_a += c.size_a;
      counts[k].size_b += c.size_b;
    }
  }
  double mean = 0.0;
  for (int k = 1; k < K; ++k) {
    const long long denom = counts[k].size_a + counts[k].size_b;
    mean += (denom == 0 ? 1.0 : 2.0 * double(counts[k].intersection) / double(denom)) / double(K - 1);
  }
  return mean;
}

void write_metrics_csv(const MetricsReport& report, const std::string& path) {
  std::vector<std::string> header{"class", "dice", "jaccard", "asd", "hd95"};
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < report.per_class.size(); ++k) {
    const auto& m = report.per_class[k];
    rows.push_back({double(k), m.dice, m.jaccard, m.asd, m.hd95});
  }
  const auto& mf = report.mean_foreground;
  rows.push_back({-1.0, mf.dice, mf.jaccard, mf.asd, mf.hd95});
  write_csv(path, header, rows);
}

}  // namespace vpseg
