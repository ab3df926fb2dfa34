#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "vpseg/error.hpp"

namespace vpseg {

// Grayscale image on a 2D pixel grid, intensities in [0,1], row-major.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> values;

  int n_pixels() const { return width * height; }
  double at(int x, int y) const { return values[std::size_t(y) * width + x]; }
  double& at(int x, int y) { return values[std::size_t(y) * width + x]; }

  void validate() const;
};

// Per-pixel class probabilities, N x K row-major (classes contiguous per
// pixel). Rows live on the simplex.
struct SoftSegmentation {
  int width = 0;
  int height = 0;
  int n_classes = 0;
  std::vector<double> probs;

  int n_pixels() const { return width * height; }
  double at(int n, int k) const { return probs[std::size_t(n) * n_classes + k]; }
  double& at(int n, int k) { return probs[std::size_t(n) * n_classes + k]; }

  void validate(double row_tol = 1e-9) const;
};

// Per-pixel class labels in {0..K-1}.
struct HardMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> labels;

  int n_pixels() const { return width * height; }
  std::uint8_t at(int x, int y) const { return labels[std::size_t(y) * width + x]; }

  void validate(int n_classes) const;
};

// K nonnegative class volumes in pixel units.
struct VolumeVector {
  std::vector<double> counts;

  int n_classes() const { return int(counts.size()); }
  double total() const;

  void validate() const;
  // additionally checks sum == n_pixels within tol (projection target contract)
  void validate_as_target(int n_pixels, double tol = 1e-6) const;
};

// Truncated, renormalized Gaussian; separable product of two 1D kernels.
struct KernelSpec {
  double sigma = 1.5;
  int radius = 5;  // must be >= ceil(3*sigma)

  void validate() const;
  // 1D weights w[-radius..radius] stored as a (2*radius+1)-vector, sum 1.
  std::vector<double> weights_1d() const;
};

inline KernelSpec make_kernel(double sigma) {
  KernelSpec k;
  k.sigma = sigma;
  k.radius = int(std::ceil(3.0 * sigma));
  return k;
}

// Scalar field helper: one real value per pixel.
struct ScalarField {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  int n_pixels() const { return width * height; }
};

// Discrete convolution with the normalized truncated Gaussian; boundaries
// handled by symmetric reflection (edge pixel repeated), which keeps
// constant fields invariant.
ScalarField gaussian_convolve(const ScalarField& field, const KernelSpec& kernel);

// Adjoint of gaussian_convolve as a linear operator on pixel values
// (scatter form of the same reflected stencil). Used by backward passes.
ScalarField gaussian_convolve_adjoint(const ScalarField& grad_out, const KernelSpec& kernel);

// Mean of each probability column: p_k = (1/N) sum_n h_k(x_n).
std::vector<double> class_ratios(const SoftSegmentation& h);

// Column sums of h in pixel units.
VolumeVector soft_volumes(const SoftSegmentation& h);

// Per-pixel argmax; ties resolved to the lowest class index.
HardMask hard_assign(const SoftSegmentation& h);

SoftSegmentation one_hot(const HardMask& mask, int n_classes);

// Integer label histogram, length n_classes.
std::vector<std::int64_t> label_histogram(const HardMask& mask, int n_classes);

VolumeVector mask_volumes(const HardMask& mask, int n_classes);

}  // namespace vpseg
