#pragma once

#include "vpseg/field.hpp"
#include "vpseg/vpstd.hpp"

// Serial reference implementations of the parallel kernels. They share no
// code with the optimized paths and exist to cross-check them in tests and
// to give the benchmark a baseline.
namespace vpseg::reference {

// Direct O(N * R^2) windowed convolution with per-axis reflected indexing.
ScalarField convolve_naive(const ScalarField& field, const KernelSpec& kernel);

// Straightforward serial scaling loop (two-pass log-sum-exp rows, no
// exact row-sum absorb, no parallelism).
ProjectionResult entropic_volume_projection_serial(const Logits& o, const VolumeVector& V,
                                                   const VPSTDConfig& cfg);

}  // namespace vpseg::reference
