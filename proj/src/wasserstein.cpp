#include "vpseg/wasserstein.hpp"

#include <algorithm>
#include <cmath>

namespace vpseg {

void CategoricalDistribution::validate(double tol) const {
  require(!p.empty(), ErrorKind::invalid_argument, "empty distribution");
  double sum = 0.0;
  for (double v : p) {
    require(std::isfinite(v) && v >= 0.0, ErrorKind::invalid_argument,
            "probabilities must be nonnegative", v);
    sum += v;
  }
  require(std::abs(sum - 1.0) <= tol, ErrorKind::invalid_argument, "probabilities must sum to 1", sum);
}

void EmpiricalDistribution::validate(double tol) const {
  require(!samples.empty(), ErrorKind::invalid_argument, "empirical distribution needs samples");
  const std::size_t K = samples.front().size();
  for (const auto& s : samples) {
    require(s.size() == K, ErrorKind::invalid_argument, "sample dimension mismatch");
    double sum = 0.0;
    for (double v : s) {
      require(v >= -tol && v <= 1.0 + tol, ErrorKind::invalid_argument, "sample outside [0,1]", v);
      sum += v;
    }
    require(std::abs(sum - 1.0) <= tol, ErrorKind::invalid_argument, "sample off the simplex", sum);
  }
}

double LinearCritic::lipschitz_bound() const { return clip * std::sqrt(double(weights.size())); }

double LinearCritic::evaluate(const std::vector<double>& x) const {
  require(x.size() == weights.size(), ErrorKind::invalid_argument, "critic input dimension mismatch");
  double acc = bias;
  for (std::size_t i = 0; i < x.size(); ++i) acc += weights[i] * x[i];
  return acc;
}

void LinearCritic::validate() const {
  require(clip > 0.0, ErrorKind::invalid_argument, "clip bound must be positive", clip);
  for (double w : weights)
    require(std::abs(w) <= clip, ErrorKind::invalid_argument, "weight outside the clip box", w);
}

LinearCritic make_critic(int n_classes, double clip) {
  LinearCritic c;
  c.weights.assign(n_classes, 0.0);
  c.bias = 0.0;
  c.clip = clip;
  return c;
}

double w1_categorical(const CategoricalDistribution& p, const CategoricalDistribution& q) {
  p.validate();
  q.validate();
  require(p.n_classes() == q.n_classes(), ErrorKind::invalid_argument,
          "distributions have different class counts");
  double cp = 0.0, cq = 0.0, w = 0.0;
  for (int k = 0; k + 1 < p.n_classes(); ++k) {
    cp += p.p[k];
    cq += q.p[k];
    w += std::abs(cp - cq);
  }
  return w;
}

namespace {

constexpr double kPivotTol = 1e-11;

// Dense tableau simplex (minimization) with Bland's rule.
struct Tableau {
  int m = 0, n = 0;
  std::vector<std::vector<double>> a;
  std::vector<double> rhs;
  std::vector<double> zrow;
  std::vector<int> basis;

  void price(const std::vector<double>& cost) {
    zrow = cost;
    for (int r = 0; r < m; ++r) {
      const double cb = cost[basis[r]];
      if (cb == 0.0) continue;
      for (int j = 0; j < n; ++j) zrow[j] -= cb * a[r][j];
    }
  }

  double objective(const std::vector<double>& cost) const {
    double z = 0.0;
    for (int r = 0; r < m; ++r) z += cost[basis[r]] * rhs[r];
    return z;
  }

  void pivot(int r, int c) {
    const double piv = a[r][c];
    for (int j = 0; j < n; ++j) a[r][j] /= piv;
    rhs[r] /= piv;
    for (int i = 0; i < m; ++i) {
      if (i == r || a[i][c] == 0.0) continue;
      const double f = a[i][c];
      for (int j = 0; j < n; ++j) a[i][j] -= f * a[r][j];
      rhs[i] -= f * rhs[r];
      if (rhs[i] < 0.0 && rhs[i] > -1e-12) rhs[i] = 0.0;
    }
    if (!zrow.empty() && zrow[c] != 0.0) {
      const double f = zrow[c];
      for (int j = 0; j < n; ++j) zrow[j] -= f * a[r][j];
    }
    basis[r] = c;
  }

  void solve() {
    for (int guard = 0; guard < 200000; ++guard) {
      int enter = -1;
      for (int j = 0; j < n; ++j)
        if (zrow[j] < -kPivotTol) {
          enter = j;
          break;
        }
      if (enter < 0) return;
      int leave = -1;
      double best = 0.0;
      for (int i = 0; i < m; ++i) {
        if (a[i][enter] > kPivotTol) {
          const double ratio = rhs[i] / a[i][enter];
          if (leave < 0 || ratio < best - 1e-12 ||
              (std::abs(ratio - best) <= 1e-12 && basis[i] < basis[leave])) {
            leave = i;
            best = ratio;
          }
        }
      }
      require(leave >= 0, ErrorKind::invalid_argument, "transport LP unbounded");
      pivot(leave, enter);
    }
    throw Error(ErrorKind::no_convergence, "simplex did not terminate");
  }
};

}  // namespace

double w1_lp_oracle(const CategoricalDistribution& p, const CategoricalDistribution& q,
                    const std::vector<double>& cost_matrix) {
  p.validate();
  q.validate();
  const int K = p.n_classes();
  require(q.n_classes() == K, ErrorKind::invalid_argument, "distributions have different class counts");
  require(K <= 8, ErrorKind::invalid_argument, "LP oracle limited to K <= 8", double(K));
  require(int(cost_matrix.size()) == K * K, ErrorKind::invalid_argument, "cost matrix must be K x K");

  const int nvar = K * K;
  const int m = 2 * K - 1;  // the last column-marginal constraint is redundant
  const int ntot = nvar + m;

  Tableau t;
  t.m = m;
  t.n = ntot;
  t.a.assign(m, std::vector<double>(ntot, 0.0));
  t.rhs.assign(m, 0.0);
  t.basis.resize(m);

  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < K; ++j) t.a[i][i * K + j] = 1.0;
    t.rhs[i] = p.p[i];
  }
  for (int j = 0; j + 1 < K; ++j) {
    for (int i = 0; i < K; ++i) t.a[K + j][i * K + j] = 1.0;
    t.rhs[K + j] = q.p[j];
  }
  for (int r = 0; r < m; ++r) {
    t.a[r][nvar + r] = 1.0;  // artificial starting basis
    t.basis[r] = nvar + r;
  }

  std::vector<double> phase1_cost(ntot, 0.0);
  for (int j = nvar; j < ntot; ++j) phase1_cost[j] = 1.0;
  t.price(phase1_cost);
  t.solve();
  require(t.objective(phase1_cost) <= 1e-9, ErrorKind::invalid_argument, "transport LP infeasible",
          t.objective(phase1_cost));

  // drive lingering zero-valued artificials out; drop rows that turn out
  // numerically redundant
  std::vector<int> keep;
  for (int r = 0; r < m; ++r) {
    if (t.basis[r] >= nvar) {
      int col = -1;
      for (int j = 0; j < nvar; ++j)
        if (std::abs(t.a[r][j]) > kPivotTol) {
          col = j;
          break;
        }
      if (col >= 0) {
        t.pivot(r, col);
        keep.push_back(r);
      }
    } else {
      keep.push_back(r);
    }
  }
  if (int(keep.size()) != m) {
    Tableau t2;
    t2.m = int(keep.size());
    t2.n = ntot;
    for (int r : keep) {
      t2.a.push_back(t.a[r]);
      t2.rhs.push_back(t.rhs[r]);
      t2.basis.push_back(t.basis[r]);
    }
    t = std::move(t2);
  }
  // artificials are done: truncate their columns
  t.n = nvar;
  for (auto& row : t.a) row.resize(nvar);

  std::vector<double> phase2_cost(cost_matrix);
  t.price(phase2_cost);
  t.solve();
  return t.objective(phase2_cost);
}

double w1_empirical_1d(std::vector<double> xs, std::vector<double> ys) {
  require(!xs.empty(), ErrorKind::invalid_argument, "empty sample set");
  require(xs.size() == ys.size(), ErrorKind::invalid_argument,
          "equal sample counts required for the 1D coupling");
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) acc += std::abs(xs[i] - ys[i]);
  return acc / double(xs.size());
}

double kr_dual_estimate(const LinearCritic& critic, const EmpiricalDistribution& gt,
                        const EmpiricalDistribution& pred) {
  critic.validate();
  gt.validate();
  pred.validate();
  double mean_gt = 0.0, mean_pred = 0.0;
  for (const auto& s : gt.samples) mean_gt += critic.evaluate(s);
  for (const auto& s : pred.samples) mean_pred += critic.evaluate(s);
  mean_gt /= double(gt.n_samples());
  mean_pred /= double(pred.n_samples());
  return (mean_gt - mean_pred) / critic.lipschitz_bound();
}

LinearCritic critic_ascent_step(const LinearCritic& critic, const EmpiricalDistribution& gt_batch,
                                const EmpiricalDistribution& pred_batch, double lr) {
  gt_batch.validate();
  pred_batch.validate();
  const int K = critic.n_classes();
  std::vector<double> grad(K, 0.0);
  for (const auto& s : gt_batch.samples)
    for (int k = 0; k < K; ++k) grad[k] += s[k] / double(gt_batch.n_samples());
  for (const auto& s : pred_batch.samples)
    for (int k = 0; k < K; ++k) grad[k] -= s[k] / double(pred_batch.n_samples());
  LinearCritic out = critic;
  for (int k = 0; k < K; ++k)
    out.weights[k] = std::clamp(out.weights[k] + lr * grad[k], -out.clip, out.clip);
  return out;
}

}  // namespace vpseg
