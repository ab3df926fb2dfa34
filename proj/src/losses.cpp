#include "vpseg/losses.hpp"

#include <cmath>

namespace vpseg {

double supervised_loss(const SoftSegmentation& h, const HardMask& gt, bool* clamped) {
  const int N = h.n_pixels();
  const int K = h.n_classes;
  require(gt.n_pixels() == N, ErrorKind::invalid_argument, "mask/segmentation size mismatch");
  gt.validate(K);
  if (clamped) *clamped = false;
  double loss = 0.0;
  for (int n = 0; n < N; ++n) {
    double p = h.at(n, gt.labels[n]);
    if (p < 1e-12) {
      p = 1e-12;
      if (clamped) *clamped = true;
    }
    loss -= std::log(p);
  }
  return loss / double(N);
}

std::vector<double> supervised_loss_grad(const SoftSegmentation& h, const HardMask& gt) {
  const int N = h.n_pixels();
  const int K = h.n_classes;
  std::vector<double> g(std::size_t(N) * K, 0.0);
  for (int n = 0; n < N; ++n) {
    const int k = gt.labels[n];
    const double p = std::max(h.at(n, k), 1e-12);
    g[std::size_t(n) * K + k] = -1.0 / (double(N) * p);
  }
  return g;
}

double regression_loss(const VolumeVector& predicted, const VolumeVector& gt) {
  require(predicted.n_classes() == gt.n_classes(), ErrorKind::invalid_argument,
          "volume vectors have different class counts");
  double acc = 0.0;
  for (int k = 0; k < gt.n_classes(); ++k) {
    const double d = predicted.counts[k] - gt.counts[k];
    acc += d * d;
  }
  return acc;
}

double ratio_consistency_loss(const VolumeVector& v_reg, const SoftSegmentation& h) {
  const int N = h.n_pixels();
  v_reg.validate_as_target(N);
  CategoricalDistribution p_reg, p_seg;
  p_reg.p.resize(v_reg.n_classes());
  for (int k = 0; k < v_reg.n_classes(); ++k) p_reg.p[k] = v_reg.counts[k] / double(N);
  p_seg.p = class_ratios(h);
  return w1_categorical(p_reg, p_seg);
}

std::vector<double> w1_categorical_subgrad_q(const CategoricalDistribution& p,
                                             const CategoricalDistribution& q) {
  const int K = p.n_classes();
  require(q.n_classes() == K, ErrorKind::invalid_argument, "distribution dimension mismatch");
  // s_k = sign(CDF_q(k) - CDF_p(k)); dW/dq_j = sum_{k >= j, k < K-1} s_k
  std::vector<double> sign_k(K - 1, 0.0);
  double cp = 0.0, cq = 0.0;
  for (int k = 0; k + 1 < K; ++k) {
    cp += p.p[k];
    cq += q.p[k];
    if (cq > cp) sign_k[k] = 1.0;
    else if (cq < cp) sign_k[k] = -1.0;
  }
  std::vector<double> g(K, 0.0);
  double suffix = 0.0;
  for (int j = K - 2; j >= 0; --j) {
    suffix += sign_k[j];
    g[j] = suffix;
  }
  return g;
}

double seg_objective(const SegNetParams& net, const std::vector<LabeledRef>& labeled,
                     const std::vector<UnlabeledRef>& unlabeled, const LinearCritic& critic,
                     const LossWeights& weights, const VPSTDConfig& solver_cfg,
                     std::vector<double>* grad_out, bool* warned_empty_labeled) {
  require(weights.alpha >= 0.0 && weights.beta >= 0.0, ErrorKind::invalid_argument,
          "loss weights must be nonnegative");
  if (warned_empty_labeled) *warned_empty_labeled = labeled.empty();
  if (grad_out) grad_out->assign(net.params.size(), 0.0);

  double total = 0.0;
  const double L = double(labeled.size());
  for (const auto& ex : labeled) {
    SegTape tape;
    SoftSegmentation h = seg_forward(net, *ex.image, *ex.volumes, solver_cfg, grad_out ? &tape : nullptr);
    total += supervised_loss(h, *ex.mask) / L;
    if (grad_out) {
      std::vector<double> gh = supervised_loss_grad(h, *ex.mask);
      for (double& v : gh) v /= L;
      std::vector<double> gp = seg_backward(net, tape, gh);
      for (int i = 0; i < net.params.size(); ++i) (*grad_out)[i] += gp[i];
    }
  }

  const bool use_unlabeled = !unlabeled.empty() && (weights.alpha > 0.0 || weights.beta > 0.0);
  if (use_unlabeled) {
    const double U = double(unlabeled.size());
    const double m_lip = critic.lipschitz_bound();
    for (const auto& ex : unlabeled) {
      SegTape tape;
      SoftSegmentation h =
          seg_forward(net, *ex.image, *ex.volume_prior, solver_cfg, grad_out ? &tape : nullptr);
      const int N = h.n_pixels();
      const int K = h.n_classes;
      CategoricalDistribution p_reg, p_seg;
      p_reg.p.resize(K);
      for (int k = 0; k < K; ++k) p_reg.p[k] = ex.volume_prior->counts[k] / double(N);
      p_seg.p = class_ratios(h);

      double term = 0.0;
      std::vector<double> g_ratio(K, 0.0);
      if (weights.alpha > 0.0) {
        term += weights.alpha * w1_categorical(p_reg, p_seg) / U;
        std::vector<double> gw = w1_categorical_subgrad_q(p_reg, p_seg);
        for (int k = 0; k < K; ++k) g_ratio[k] += weights.alpha * gw[k] / U;
      }
      if (weights.beta > 0.0) {
        term -= weights.beta / m_lip * critic.evaluate(p_seg.p) / U;
        for (int k = 0; k < K; ++k) g_ratio[k] -= weights.beta / m_lip * critic.weights[k] / U;
      }
      total += term;
      if (grad_out) {
        std::vector<double> gh(std::size_t(N) * K);
        for (int n = 0; n < N; ++n)
          for (int k = 0; k < K; ++k) gh[std::size_t(n) * K + k] = g_ratio[k] / double(N);
        std::vector<double> gp = seg_backward(net, tape, gh);
        for (int i = 0; i < net.params.size(); ++i) (*grad_out)[i] += gp[i];
      }
    }
  }
  return total;
}

double critic_objective(const LinearCritic& critic, const std::vector<std::vector<double>>& gt_ratios,
                        const std::vector<std::vector<double>>& pred_ratios) {
  require(!gt_ratios.empty() && !pred_ratios.empty(), ErrorKind::invalid_argument,
          "critic objective needs non-empty sets");
  double mean_pred = 0.0, mean_gt = 0.0;
  for (const auto& s : pred_ratios) mean_pred += critic.evaluate(s);
  for (const auto& s : gt_ratios) mean_gt += critic.evaluate(s);
  return mean_pred / double(pred_ratios.size()) - mean_gt / double(gt_ratios.size());
}

}  // namespace vpseg
