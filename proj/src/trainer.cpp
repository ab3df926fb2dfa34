#include "vpseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vpseg/io.hpp"
#include "vpseg/rng.hpp"

namespace vpseg {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::vpnet: return "vpnet";
    case Variant::vpnet_gt: return "vpnet_gt";
    case Variant::vpnet_rw: return "vpnet_rw";
    case Variant::vpnet_emp: return "vpnet_emp";
  }
  return "vpnet";
}

Variant variant_from_name(const std::string& name) {
  if (name == "vpnet") return Variant::vpnet;
  if (name == "vpnet_gt") return Variant::vpnet_gt;
  if (name == "vpnet_rw") return Variant::vpnet_rw;
  if (name == "vpnet_emp") return Variant::vpnet_emp;
  throw Error(ErrorKind::invalid_argument, "unknown variant: " + name);
}

void TrainConfig::validate() const {
  require(epochs >= 0 && batch_size >= 1, ErrorKind::invalid_argument, "bad epoch/batch configuration");
  require(lr > 0.0 && lr_decay > 0.0 && lr_decay <= 1.0, ErrorKind::invalid_argument,
          "bad learning-rate configuration");
  require(plateau_patience >= 1, ErrorKind::invalid_argument, "plateau_patience must be positive");
  require(critic_steps_per_seg_step >= 0, ErrorKind::invalid_argument, "bad critic step count");
  require(weights.alpha >= 0.0 && weights.beta >= 0.0, ErrorKind::invalid_argument,
          "loss weights must be nonnegative");
  require(critic_clip > 0.0 && critic_lr > 0.0, ErrorKind::invalid_argument, "bad critic configuration");
  solver.validate();
}

void write_history_csv(const TrainHistory& history, const std::string& path) {
  std::vector<std::vector<double>> rows;
  for (const auto& e : history.epochs)
    rows.push_back({double(e.epoch), e.seg_loss, e.critic_obj, e.val_dice, e.lr});
  write_csv(path, {"epoch", "seg_loss", "critic_obj", "val_dice", "lr"}, rows);
}

Split split_dataset(const std::vector<SyntheticSample>& dataset, int n_labeled, int n_validation,
                    std::uint64_t seed) {
  require(n_labeled >= 1 && n_validation >= 1, ErrorKind::invalid_argument,
          "need at least one labeled and one validation sample");
  require(n_labeled + n_validation <= int(dataset.size()), ErrorKind::invalid_argument,
          "split exceeds the dataset size");
  std::vector<int> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  Split s;
  int pos = 0;
  for (int i = 0; i < n_validation; ++i) s.validation.push_back(dataset[order[pos++]]);
  for (int i = 0; i < n_labeled; ++i) s.labeled.push_back(dataset[order[pos++]]);
  while (pos < int(order.size())) s.hidden_.push_back(dataset[order[pos++]]);
  return s;
}

void adam_step(std::vector<double>& params, AdamState& state, const std::vector<double>& grad,
               double lr) {
  require(params.size() == grad.size(), ErrorKind::invalid_argument, "adam: size mismatch");
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(b1, double(state.t));
  const double c2 = 1.0 - std::pow(b2, double(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * grad[i];
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * grad[i] * grad[i];
    params[i] -= lr * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + eps);
  }
}

RegNetParams pretrain_regression(RegNetParams reg, const std::vector<SyntheticSample>& labeled,
                                 int epochs, double lr, std::vector<double>* loss_trace) {
  require(!labeled.empty(), ErrorKind::invalid_argument, "regression pretraining needs labeled data");
  AdamState opt;
  for (int epoch = 0; epoch <= epochs; ++epoch) {
    std::vector<double> grad(reg.params.size(), 0.0);
    double total = 0.0;
    for (const auto& sample : labeled) {
      RegTape tape;
      VolumeVector pred = reg_forward(reg, sample.image, &tape);
      total += regression_loss(pred, sample.volumes);
      std::vector<double> gv(pred.n_classes());
      for (int k = 0; k < pred.n_classes(); ++k)
        gv[k] = 2.0 * (pred.counts[k] - sample.volumes.counts[k]);
      std::vector<double> gp = reg_backward(reg, tape, gv);
      for (int i = 0; i < reg.params.size(); ++i) grad[i] += gp[i];
    }
    if (loss_trace) loss_trace->push_back(total);
    if (epoch == epochs) break;
    adam_step(reg.params.data, opt, grad, lr);
  }
  return reg;
}

namespace {

std::vector<double> ratio_of(const VolumeVector& v) {
  std::vector<double> r(v.counts.size());
  const double total = v.total();
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = v.counts[k] / total;
  return r;
}

// Volume priors for an unlabeled batch under the active variant. For
// vpnet_gt this legitimately reads the hidden labels (audited).
std::vector<VolumeVector> unlabeled_priors(const TrainState& state, const std::vector<int>& batch,
                                           const Split& split) {
  std::vector<VolumeVector> priors;
  priors.reserve(batch.size());
  for (int idx : batch) {
    switch (state.cfg.variant) {
      case Variant::vpnet_gt:
        priors.push_back(split.unlabeled_gt_volumes(idx));
        break;
      case Variant::vpnet_emp:
        priors.push_back(state.v_emp);
        break;
      case Variant::vpnet:
      case Variant::vpnet_rw:
        priors.push_back(reg_forward(state.reg, split.unlabeled_image(idx)));
        break;
    }
  }
  return priors;
}

LossWeights effective_weights(const TrainConfig& cfg) {
  LossWeights w = cfg.weights;
  if (cfg.variant == Variant::vpnet_rw) w.beta = 0.0;  // remove the dataset-scale term
  return w;
}

}  // namespace

double train_step_seg(TrainState& state, const std::vector<const SyntheticSample*>& labeled_batch,
                      const std::vector<int>& unlabeled_batch, const Split& split) {
  const LossWeights w = effective_weights(state.cfg);

  std::vector<LabeledRef> labeled;
  for (const auto* s : labeled_batch) labeled.push_back({&s->image, &s->mask, &s->volumes});

  std::vector<VolumeVector> priors;
  std::vector<UnlabeledRef> unlabeled;
  if (!unlabeled_batch.empty() && (w.alpha > 0.0 || w.beta > 0.0)) {
    priors = unlabeled_priors(state, unlabeled_batch, split);
    for (std::size_t i = 0; i < unlabeled_batch.size(); ++i)
      unlabeled.push_back({&split.unlabeled_image(unlabeled_batch[i]), &priors[i]});
  }

  std::vector<double> grad;
  const double objective =
      seg_objective(state.seg, labeled, unlabeled, state.critic, w, state.cfg.solver, &grad);
  adam_step(state.seg.params.data, state.seg_opt, grad, state.lr);
  return objective;
}

double train_step_critic(TrainState& state, const std::vector<const SyntheticSample*>& labeled_batch,
                         const std::vector<int>& unlabeled_batch, const Split& split) {
  const LossWeights w = effective_weights(state.cfg);
  if (w.beta <= 0.0 || unlabeled_batch.empty() || labeled_batch.empty()) return 0.0;

  EmpiricalDistribution gt, pred;
  for (const auto* s : labeled_batch) gt.samples.push_back(ratio_of(s->volumes));
  std::vector<VolumeVector> priors = unlabeled_priors(state, unlabeled_batch, split);
  for (std::size_t i = 0; i < unlabeled_batch.size(); ++i) {
    SoftSegmentation h = seg_forward(state.seg, split.unlabeled_image(unlabeled_batch[i]), priors[i],
                                     state.cfg.solver);
    pred.samples.push_back(class_ratios(h));
  }
  for (int s = 0; s < state.cfg.critic_steps_per_seg_step; ++s)
    state.critic = critic_ascent_step(state.critic, gt, pred, state.cfg.critic_lr);
  return critic_objective(state.critic, gt.samples, pred.samples);
}

TrainResult train(const TrainConfig& cfg, Split& split) {
  cfg.validate();
  require(!split.labeled.empty(), ErrorKind::invalid_argument, "training needs labeled samples");
  require(!split.validation.empty(), ErrorKind::invalid_argument, "training needs validation samples");

  const int K = cfg.seg.n_classes;
  TrainState state;
  state.cfg = cfg;
  state.seg = init_seg_net(cfg.seg, Rng::stream(cfg.seed, 1).next_u64());
  state.reg = init_reg_net(cfg.reg, Rng::stream(cfg.seed, 2).next_u64());
  state.critic = make_critic(K, cfg.critic_clip);
  state.lr = cfg.lr;

  std::vector<VolumeVector> labeled_volumes;
  for (const auto& s : split.labeled) labeled_volumes.push_back(s.volumes);
  state.v_emp = compute_v_emp(labeled_volumes);

  const bool uses_regressor = cfg.variant == Variant::vpnet || cfg.variant == Variant::vpnet_rw;
  if (uses_regressor)
    state.reg = pretrain_regression(state.reg, split.labeled, cfg.reg_pretrain_epochs,
                                    cfg.reg_pretrain_lr);

  const VolumeSource val_source = cfg.variant == Variant::vpnet_gt  ? VolumeSource::gt
                                  : cfg.variant == Variant::vpnet_emp ? VolumeSource::emp
                                                                      : VolumeSource::reg;

  TrainResult result;
  result.reg = state.reg;
  result.seg = state.seg;
  result.critic = state.critic;
  result.best_val_dice = -1.0;

  const int U = split.n_unlabeled();
  const int l_per_batch = U > 0 ? std::max(1, cfg.batch_size / 2) : cfg.batch_size;
  const int u_per_batch = U > 0 ? std::max(1, cfg.batch_size - l_per_batch) : 0;
  const int steps = int((split.labeled.size() + l_per_batch - 1) / l_per_batch);

  Rng shuffle_rng(cfg.seed);
  int stagnation = 0;
  try {
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
      std::vector<int> lorder(split.labeled.size());
      std::iota(lorder.begin(), lorder.end(), 0);
      shuffle_rng.shuffle(lorder);
      std::vector<int> uorder(U);
      std::iota(uorder.begin(), uorder.end(), 0);
      shuffle_rng.shuffle(uorder);

      double seg_loss_sum = 0.0, critic_sum = 0.0;
      int lpos = 0, upos = 0;
      for (int step = 0; step < steps; ++step) {
        std::vector<const SyntheticSample*> lbatch;
        for (int i = 0; i < l_per_batch; ++i)
          lbatch.push_back(&split.labeled[lorder[(lpos++) % lorder.size()]]);
        std::vector<int> ubatch;
        for (int i = 0; i < u_per_batch && U > 0; ++i) ubatch.push_back(uorder[(upos++) % U]);
        seg_loss_sum += train_step_seg(state, lbatch, ubatch, split);
        critic_sum += train_step_critic(state, lbatch, ubatch, split);
      }

      for (double p : state.seg.params.data)
        require(std::isfinite(p), ErrorKind::state, "segmentation parameters are no longer finite");

      const double vd = validation_dice(state.seg, uses_regressor ? &state.reg : nullptr,
                                        cfg.solver, split.validation, val_source, &state.v_emp);

      EpochRecord rec;
      rec.epoch = epoch;
      rec.seg_loss = seg_loss_sum / double(steps);
      rec.critic_obj = critic_sum / double(steps);
      rec.val_dice = vd;
      rec.lr = state.lr;
      result.history.epochs.push_back(rec);

      if (vd > result.best_val_dice) {
        result.best_val_dice = vd;
        result.best_epoch = epoch;
        result.seg = state.seg;
        result.critic = state.critic;
        stagnation = 0;
      } else if (++stagnation >= cfg.plateau_patience) {
        state.lr *= cfg.lr_decay;
        stagnation = 0;
      }
    }
  } catch (const Error& e) {
    result.aborted = true;
    result.abort_reason = e.what();
  }
  result.reg = state.reg;
  if (result.best_val_dice < 0.0) {  // zero-epoch runs keep the initial nets
    result.seg = state.seg;
    result.critic = state.critic;
    result.best_val_dice = 0.0;
  }
  return result;
}

}  // namespace vpseg
