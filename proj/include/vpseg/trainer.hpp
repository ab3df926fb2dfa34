#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vpseg/losses.hpp"
#include "vpseg/metrics.hpp"
#include "vpseg/synthdata.hpp"

namespace vpseg {

enum class Variant { vpnet, vpnet_gt, vpnet_rw, vpnet_emp };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct TrainConfig {
  int epochs = 100;
  int batch_size = 4;
  double lr = 1e-3;
  int plateau_patience = 20;
  double lr_decay = 0.5;
  int critic_steps_per_seg_step = 1;
  std::uint64_t seed = 0;
  Variant variant = Variant::vpnet;
  LossWeights weights;          // alpha, beta
  double critic_clip = 0.01;
  double critic_lr = 0.01;
  VPSTDConfig solver;
  SegNetConfig seg;
  RegNetConfig reg;
  int reg_pretrain_epochs = 200;
  double reg_pretrain_lr = 1e-2;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double seg_loss = 0.0;
  double critic_obj = 0.0;
  double val_dice = 0.0;
  double lr = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

void write_history_csv(const TrainHistory& history, const std::string& path);

// Labeled/unlabeled/validation partition. Ground truth of the unlabeled
// images stays behind accessors that count every read, so training-path
// label hygiene is auditable (the counter must stay 0 for every variant
// except vpnet_gt).
struct Split {
  std::vector<SyntheticSample> labeled;
  std::vector<SyntheticSample> validation;

  int n_unlabeled() const { return int(hidden_.size()); }
  const Image& unlabeled_image(int i) const { return hidden_[i].image; }
  const HardMask& unlabeled_gt_mask(int i) const {
    ++hidden_reads_;
    return hidden_[i].mask;
  }
  const VolumeVector& unlabeled_gt_volumes(int i) const {
    ++hidden_reads_;
    return hidden_[i].volumes;
  }
  long long hidden_label_reads() const { return hidden_reads_; }

  // full samples for post-training evaluation; counts as a hidden read
  const SyntheticSample& unlabeled_full(int i) const {
    ++hidden_reads_;
    return hidden_[i];
  }

  std::vector<SyntheticSample> hidden_;  // filled by split_dataset
  mutable long long hidden_reads_ = 0;
};

// Deterministic shuffled partition: first n_validation samples validate,
// the next n_labeled are labeled, the rest are unlabeled.
Split split_dataset(const std::vector<SyntheticSample>& dataset, int n_labeled, int n_validation,
                    std::uint64_t seed);

// Adaptive-moment gradient descent (beta 0.9/0.999, eps 1e-8).
struct AdamState {
  std::vector<double> m, v;
  long long t = 0;
};

void adam_step(std::vector<double>& params, AdamState& state, const std::vector<double>& grad,
               double lr);

// Full-batch descent on sum regression_loss over the labeled set; returns
// the updated parameters. loss_trace, when given, receives the objective
// before each update (length epochs + 1, last entry final).
RegNetParams pretrain_regression(RegNetParams reg, const std::vector<SyntheticSample>& labeled,
                                 int epochs, double lr, std::vector<double>* loss_trace = nullptr);

struct TrainState {
  TrainConfig cfg;
  SegNetParams seg;
  RegNetParams reg;       // frozen after pretraining
  LinearCritic critic;
  AdamState seg_opt;
  VolumeVector v_emp;
  double lr = 0.0;
};

// One descent step on the segmentation subproblem over the given batch;
// the volume prior of each unlabeled image follows the variant. Returns
// the batch objective before the update.
double train_step_seg(TrainState& state, const std::vector<const SyntheticSample*>& labeled_batch,
                      const std::vector<int>& unlabeled_batch, const Split& split);

// critic_steps_per_seg_step ascent steps on the critic, fed by current
// segmentation predictions for the unlabeled batch; a no-op for vpnet_rw
// (and whenever beta == 0). Returns the critic objective after updating.
double train_step_critic(TrainState& state, const std::vector<const SyntheticSample*>& labeled_batch,
                         const std::vector<int>& unlabeled_batch, const Split& split);

struct TrainResult {
  SegNetParams seg;     // best-validation checkpoint
  RegNetParams reg;
  LinearCritic critic;
  TrainHistory history;
  double best_val_dice = 0.0;
  int best_epoch = 0;
  bool aborted = false;
  std::string abort_reason;
};

TrainResult train(const TrainConfig& cfg, Split& split);

}  // namespace vpseg
