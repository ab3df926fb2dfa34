#pragma once

#include <vector>

#include "vpseg/field.hpp"

namespace vpseg {

// Backbone output o, N x K row-major; the assignment cost is c = -o.
struct Logits {
  int width = 0;
  int height = 0;
  int n_classes = 0;
  std::vector<double> v;

  int n_pixels() const { return width * height; }
  double at(int n, int k) const { return v[std::size_t(n) * n_classes + k]; }
  double& at(int n, int k) { return v[std::size_t(n) * n_classes + k]; }

  void validate() const;
};

// One entropic dual potential per class, gauge-fixed so u[0] == 0.
struct DualPotential {
  std::vector<double> u;
};

struct VPSTDConfig {
  double epsilon = 0.1;          // entropic weight
  double lambda = 1.0;           // TD regularization weight
  KernelSpec kernel = make_kernel(1.5);
  double sinkhorn_tol = 1e-6;    // max_k |colsum_k - V_k|
  int sinkhorn_max_iter = 1000;
  int td_iters = 5;              // outer linearization iterations

  void validate() const;
};

// Heuristic default for the entropic weight: a tenth of the logit spread.
double suggest_epsilon(const Logits& o);

// Per-iteration solver trace, exportable as CSV.
struct SinkhornTrace {
  std::vector<double> residuals;
  std::vector<double> dual_objectives;
};

struct ProjectionResult {
  SoftSegmentation h;
  DualPotential u;
  int iterations = 0;
};

// Recorded state of one projection, enough to replay its iterations in
// reverse: h_steps[i] holds the row-softmax output of iteration i, and
// h_steps.back() is the projection's output.
struct ProjectionTape {
  int width = 0;
  int height = 0;
  int n_classes = 0;
  double epsilon = 0.0;
  std::vector<std::vector<double>> h_steps;
};

// Recorded state of a full TD-regularized solve (td_iters + 1 projections).
// Single-consumer: exactly one backward call.
struct VPSTDTape {
  VPSTDConfig cfg;
  std::vector<ProjectionTape> projections;
  bool consumed = false;

  bool valid() const { return !projections.empty() && !consumed; }
};

// Volume-constrained entropic projection: minimizes
//   sum_{n,k} (-o_k(x_n)) h_k(x_n) + eps * sum h ln h
// over row-stochastic h with column sums V, by alternating dual scaling.
// Rows are normalized exactly each iteration (h = row-softmax((o+u)/eps));
// u is updated until max_k |colsum_k - V_k| <= sinkhorn_tol.
ProjectionResult entropic_volume_projection(const Logits& o, const VolumeVector& V,
                                            const VPSTDConfig& cfg, SinkhornTrace* trace = nullptr,
                                            ProjectionTape* tape = nullptr);

// Full VP-STD solve: the concave TD term is linearized at the previous
// iterate (cost adjustment lambda * k*(1 - 2 h)) and each outer step is an
// entropic volume projection, so every iterate is feasible and the total
// energy is non-increasing. energy_trace, when given, receives the energy
// of h^(0)..h^(td_iters).
SoftSegmentation td_regularized_solve(const Logits& o, const VolumeVector& V, const VPSTDConfig& cfg,
                                      VPSTDTape* tape = nullptr,
                                      std::vector<double>* energy_trace = nullptr);

// F(h;-o) + R(h): data term, entropy (0 ln 0 := 0), and TD term.
double std_energy(const SoftSegmentation& h, const Logits& o, const VPSTDConfig& cfg);

// Gradient of a scalar loss w.r.t. o, obtained by differentiating through
// the unrolled iterations recorded in the tape. grad_h is N x K row-major
// w.r.t. the solve's output. Consumes the tape.
Logits vpstd_backward(const std::vector<double>& grad_h, VPSTDTape& tape);

// Componentwise mean of the labeled ground-truth volumes.
VolumeVector compute_v_emp(const std::vector<VolumeVector>& labeled_volumes);

}  // namespace vpseg
