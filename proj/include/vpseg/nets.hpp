#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vpseg/vpstd.hpp"

namespace vpseg {

struct ParamSlice {
  std::string name;
  int offset = 0;
  int size = 0;
  std::vector<int> shape;
};

// Flat trainable parameter vector with named slices.
struct ParamVector {
  std::vector<double> data;
  std::vector<ParamSlice> slices;

  int size() const { return int(data.size()); }
  const ParamSlice& slice(const std::string& name) const;
  double* slice_data(const ParamSlice& s) { return data.data() + s.offset; }
  const double* slice_data(const ParamSlice& s) const { return data.data() + s.offset; }
};

// Raw little-endian float32 values at <path>, slice manifest at <path>.json.
void save_params(const ParamVector& p, const std::string& path);
ParamVector load_params(const std::string& path);

enum class Activation { softplus, identity };

// Segmentation backbone: three 3x3 same convolutions (1 -> c1 -> c2 -> K)
// with a smooth nonlinearity after each hidden layer; the produced logits
// feed the VP-STD layer.
struct SegNetConfig {
  int n_classes = 2;
  int c1 = 8;
  int c2 = 8;
  Activation activation = Activation::softplus;
};

struct SegNetParams {
  SegNetConfig cfg;
  ParamVector params;
};

// Volume regressor: two 3x3 same convolutions (1 -> c1 -> c2), global
// average pooling, affine head to K, softmax scaled by the pixel count.
struct RegNetConfig {
  int n_classes = 2;
  int c1 = 4;
  int c2 = 4;
  Activation activation = Activation::softplus;
};

struct RegNetParams {
  RegNetConfig cfg;
  ParamVector params;
};

// Xavier-uniform weights (limit sqrt(6/(fan_in+fan_out))), zero biases.
SegNetParams init_seg_net(const SegNetConfig& cfg, std::uint64_t seed);
RegNetParams init_reg_net(const RegNetConfig& cfg, std::uint64_t seed);

// Recorded forward state; single-consumer.
struct SegTape {
  std::vector<double> input;          // 1 x N plane
  int width = 0, height = 0;
  std::vector<double> z1, a1, z2, a2; // channel-major planes
  Logits logits;
  VPSTDTape solver;
  bool consumed = false;
};

struct RegTape {
  std::vector<double> input;
  int width = 0, height = 0;
  std::vector<double> z1, a1, z2, a2;
  std::vector<double> pooled;
  std::vector<double> softmaxed;
  bool consumed = false;
};

// Backbone logits only (no solver layer).
Logits seg_logits(const SegNetParams& net, const Image& img, SegTape* tape = nullptr);

// Full forward: backbone then VP-STD layer; output satisfies the volume
// feasibility contract of the solver.
SoftSegmentation seg_forward(const SegNetParams& net, const Image& img, const VolumeVector& V,
                             const VPSTDConfig& cfg, SegTape* tape = nullptr);

// Reverse-mode gradient of a scalar loss w.r.t. all seg parameters given
// dLoss/dh; goes through the VP-STD layer via vpstd_backward. Consumes the
// tape (second call throws).
std::vector<double> seg_backward(const SegNetParams& net, SegTape& tape,
                                 const std::vector<double>& grad_h);

// Gradient w.r.t. parameters given dLoss/dlogits (for solver-free checks).
std::vector<double> seg_backbone_backward(const SegNetParams& net, SegTape& tape,
                                          const std::vector<double>& grad_logits);

VolumeVector reg_forward(const RegNetParams& net, const Image& img, RegTape* tape = nullptr);

std::vector<double> reg_backward(const RegNetParams& net, RegTape& tape,
                                 const std::vector<double>& grad_volumes);

struct GradSliceReport {
  std::string slice;
  double max_rel_err = 0.0;
  double grad_norm = 0.0;
};

struct GradReport {
  std::vector<GradSliceReport> slices;
  double rtol = 0.0;
  bool pass = false;
  double worst() const;
};

// Central finite differences (step 1e-4 by default) against an analytic
// gradient; per-slice relative error is the max entry error over the
// slice's FD infinity norm (floored at 1e-6 of the global FD norm).
GradReport grad_check(const std::function<double(const std::vector<double>&)>& loss,
                      const std::vector<double>& analytic_grad, const ParamVector& params,
                      double rtol, double step = 1e-4);

}  // namespace vpseg
