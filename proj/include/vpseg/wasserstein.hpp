#pragma once

#include <vector>

#include "vpseg/error.hpp"

namespace vpseg {

// K-simplex vector of class ratios.
struct CategoricalDistribution {
  std::vector<double> p;

  int n_classes() const { return int(p.size()); }
  void validate(double tol = 1e-9) const;
};

// M samples on the K-simplex (per-image class-ratio vectors).
struct EmpiricalDistribution {
  std::vector<std::vector<double>> samples;

  int n_samples() const { return int(samples.size()); }
  void validate(double tol = 1e-6) const;
};

// Clipped affine Kantorovich-Rubinstein witness f(x) = w.x + b with
// per-coordinate bound |w_i| <= clip; the declared Lipschitz constant is
// clip*sqrt(K) under the Euclidean metric on ratio vectors.
struct LinearCritic {
  std::vector<double> weights;
  double bias = 0.0;
  double clip = 0.01;

  int n_classes() const { return int(weights.size()); }
  double lipschitz_bound() const;
  double evaluate(const std::vector<double>& x) const;
  void validate() const;
};

LinearCritic make_critic(int n_classes, double clip = 0.01);

// W1 between categoricals under the class-index ground metric d(i,j)=|i-j|,
// via the cumulative-sum formula.
double w1_categorical(const CategoricalDistribution& p, const CategoricalDistribution& q);

// Exact transport LP for K <= 8 under an arbitrary cost matrix
// (row-major K x K). Test oracle; dense two-phase simplex.
double w1_lp_oracle(const CategoricalDistribution& p, const CategoricalDistribution& q,
                    const std::vector<double>& cost_matrix);

// Exact W1 of two equal-size 1D empirical distributions: mean absolute
// difference of the sorted samples.
double w1_empirical_1d(std::vector<double> xs, std::vector<double> ys);

// (mean_x f(x) - mean_z f(z)) / lipschitz_bound.
double kr_dual_estimate(const LinearCritic& critic, const EmpiricalDistribution& gt,
                        const EmpiricalDistribution& pred);

// One gradient ascent step on mean f(gt) - mean f(pred), then clip.
LinearCritic critic_ascent_step(const LinearCritic& critic,
                                const EmpiricalDistribution& gt_batch,
                                const EmpiricalDistribution& pred_batch, double lr);

}  // namespace vpseg
