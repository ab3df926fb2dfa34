#pragma once

#include <vector>

#include "vpseg/nets.hpp"
#include "vpseg/wasserstein.hpp"

namespace vpseg {

struct LossWeights {
  double alpha = 0.01;
  double beta = 0.01;
};

// Multi-class cross-entropy -(1/N) sum_n sum_k G_k(x_n) ln h_k(x_n).
// Probabilities at a true class are clamped at 1e-12; `clamped` reports
// whether that happened.
double supervised_loss(const SoftSegmentation& h, const HardMask& gt, bool* clamped = nullptr);

// dLoss/dh for supervised_loss, N x K row-major.
std::vector<double> supervised_loss_grad(const SoftSegmentation& h, const HardMask& gt);

// sum_k (pred_k - gt_k)^2 in squared pixel units.
double regression_loss(const VolumeVector& predicted, const VolumeVector& gt);

// W1 between the regressed ratios V_reg/N and the ratios of h.
double ratio_consistency_loss(const VolumeVector& v_reg, const SoftSegmentation& h);

// Subgradient of w1_categorical(p, q) in its second argument (sign(0)=0).
std::vector<double> w1_categorical_subgrad_q(const CategoricalDistribution& p,
                                             const CategoricalDistribution& q);

// Lightweight batch views; the volume prior of an unlabeled example is
// already resolved to whatever the training variant dictates.
struct LabeledRef {
  const Image* image = nullptr;
  const HardMask* mask = nullptr;
  const VolumeVector* volumes = nullptr;
};

struct UnlabeledRef {
  const Image* image = nullptr;
  const VolumeVector* volume_prior = nullptr;
};

// The segmentation subproblem objective on one batch:
//   mean_l L_S + alpha * mean_u L_G - (beta / M) * mean_u f(ratios_u),
// differentiable w.r.t. the seg parameters (grad lands in grad_out when
// non-null). An empty labeled part contributes zero with a warning flag;
// the unlabeled forward is skipped entirely when alpha == beta == 0.
double seg_objective(const SegNetParams& net, const std::vector<LabeledRef>& labeled,
                     const std::vector<UnlabeledRef>& unlabeled, const LinearCritic& critic,
                     const LossWeights& weights, const VPSTDConfig& solver_cfg,
                     std::vector<double>* grad_out = nullptr, bool* warned_empty_labeled = nullptr);

// The critic subproblem objective: mean f(pred) - mean f(gt), minimized.
double critic_objective(const LinearCritic& critic, const std::vector<std::vector<double>>& gt_ratios,
                        const std::vector<std::vector<double>>& pred_ratios);

}  // namespace vpseg
