#include "vpseg/field.hpp"

#include <cmath>

#include "vpseg/parallel.hpp"

namespace vpseg {

void Image::validate() const {
  require(width > 0 && height > 0, ErrorKind::invalid_argument, "image dimensions must be positive");
  require(channels == 1, ErrorKind::invalid_argument, "only grayscale images supported");
  require(int(values.size()) == n_pixels(), ErrorKind::invalid_argument, "image value count mismatch");
  for (double v : values)
    require(std::isfinite(v) && v >= 0.0 && v <= 1.0, ErrorKind::invalid_argument,
            "image values must be finite and in [0,1]", v);
}

void SoftSegmentation::validate(double row_tol) const {
  require(width > 0 && height > 0, ErrorKind::invalid_argument, "segmentation dimensions must be positive");
  require(n_classes >= 2, ErrorKind::invalid_argument, "need at least two classes");
  require(probs.size() == std::size_t(n_pixels()) * n_classes, ErrorKind::invalid_argument,
          "probability buffer size mismatch");
  const int N = n_pixels();
  for (int n = 0; n < N; ++n) {
    double sum = 0.0;
    for (int k = 0; k < n_classes; ++k) {
      double p = at(n, k);
      require(p >= 0.0 && p <= 1.0, ErrorKind::invalid_argument, "probability outside [0,1]", p);
      sum += p;
    }
    require(std::abs(sum - 1.0) <= row_tol, ErrorKind::invalid_argument, "row does not sum to 1", sum);
  }
}

void HardMask::validate(int n_classes) const {
  require(width > 0 && height > 0, ErrorKind::invalid_argument, "mask dimensions must be positive");
  require(int(labels.size()) == n_pixels(), ErrorKind::invalid_argument, "mask label count mismatch");
  for (auto l : labels)
    require(int(l) < n_classes, ErrorKind::invalid_argument, "label exceeds class count", double(l));
}

double VolumeVector::total() const {
  double s = 0.0;
  for (double c : counts) s += c;
  return s;
}

void VolumeVector::validate() const {
  require(!counts.empty(), ErrorKind::invalid_argument, "empty volume vector");
  for (double c : counts)
    require(std::isfinite(c) && c >= 0.0, ErrorKind::invalid_argument, "volumes must be nonnegative", c);
}

void VolumeVector::validate_as_target(int n_pixels, double tol) const {
  validate();
  double s = total();
  require(std::abs(s - n_pixels) <= tol, ErrorKind::invalid_argument,
          "volume target must sum to the pixel count", s);
}

void KernelSpec::validate() const {
  require(sigma > 0.0, ErrorKind::invalid_argument, "kernel sigma must be positive", sigma);
  require(radius >= int(std::ceil(3.0 * sigma)), ErrorKind::invalid_argument,
          "kernel radius below 3*sigma truncation", double(radius));
}

std::vector<double> KernelSpec::weights_1d() const {
  validate();
  std::vector<double> w(2 * radius + 1);
  double sum = 0.0;
  for (int t = -radius; t <= radius; ++t) {
    double v = std::exp(-0.5 * (t * t) / (sigma * sigma));
    w[t + radius] = v;
    sum += v;
  }
  for (double& v : w) v /= sum;
  return w;
}

namespace {

// Symmetric reflection with edge repeat; valid for any i and n >= 1.
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

// Horizontal then vertical pass; per-axis reflection makes the separable
// form identical to the full 2D windowed stencil.
void conv_pass_rows(const double* in, double* out, int w, int h, const std::vector<double>& k, int r) {
  parallel_for(h, [&](std::int64_t y) {
    const double* row = in + y * w;
    double* orow = out + y * w;
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int t = -r; t <= r; ++t) acc += k[t + r] * row[reflect_index(x + t, w)];
      orow[x] = acc;
    }
  });
}

void conv_pass_cols(const double* in, double* out, int w, int h, const std::vector<double>& k, int r) {
  parallel_for(h, [&](std::int64_t y) {
    double* orow = out + y * w;
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int t = -r; t <= r; ++t) acc += k[t + r] * in[std::size_t(reflect_index(int(y) + t, h)) * w + x];
      orow[x] = acc;
    }
  });
}

// Scatter adjoints of the two passes (transpose of gather with reflection).
void conv_pass_rows_adjoint(const double* g, double* out, int w, int h, const std::vector<double>& k, int r) {
  parallel_for(h, [&](std::int64_t y) {
    const double* grow = g + y * w;
    double* orow = out + y * w;
    for (int x = 0; x < w; ++x) orow[x] = 0.0;
    for (int x = 0; x < w; ++x) {
      double gv = grow[x];
      for (int t = -r; t <= r; ++t) orow[reflect_index(x + t, w)] += k[t + r] * gv;
    }
  });
}

void conv_pass_cols_adjoint(const double* g, double* out, int w, int h, const std::vector<double>& k, int r) {
  for (std::size_t i = 0; i < std::size_t(w) * h; ++i) out[i] = 0.0;
  // serial: rows scatter into each other
  for (int y = 0; y < h; ++y) {
    const double* grow = g + std::size_t(y) * w;
    for (int t = -r; t <= r; ++t) {
      double* orow = out + std::size_t(reflect_index(y + t, h)) * w;
      double kt = k[t + r];
      for (int x = 0; x < w; ++x) orow[x] += kt * grow[x];
    }
  }
}

}  // namespace

ScalarField gaussian_convolve(const ScalarField& field, const KernelSpec& kernel) {
  require(field.width > 0 && field.height > 0, ErrorKind::invalid_argument, "field dimensions must be positive");
  require(int(field.values.size()) == field.n_pixels(), ErrorKind::invalid_argument,
          "field size does not match its dimensions");
  const std::vector<double> k = kernel.weights_1d();
  ScalarField tmp{field.width, field.height, std::vector<double>(field.values.size())};
  ScalarField out{field.width, field.height, std::vector<double>(field.values.size())};
  conv_pass_rows(field.values.data(), tmp.values.data(), field.width, field.height, k, kernel.radius);
  conv_pass_cols(tmp.values.data(), out.values.data(), field.width, field.height, k, kernel.radius);
  return out;
}

ScalarField gaussian_convolve_adjoint(const ScalarField& grad_out, const KernelSpec& kernel) {
  require(int(grad_out.values.size()) == grad_out.n_pixels(), ErrorKind::invalid_argument,
          "field size does not match its dimensions");
  const std::vector<double> k = kernel.weights_1d();
  // forward is cols(rows(f)); adjoint is rows^T(cols^T(g))
  ScalarField tmp{grad_out.width, grad_out.height, std::vector<double>(grad_out.values.size())};
  ScalarField out{grad_out.width, grad_out.height, std::vector<double>(grad_out.values.size())};
  conv_pass_cols_adjoint(grad_out.values.data(), tmp.values.data(), grad_out.width, grad_out.height, k,
                         kernel.radius);
  conv_pass_rows_adjoint(tmp.values.data(), out.values.data(), grad_out.width, grad_out.height, k,
                         kernel.radius);
  return out;
}

std::vector<double> class_ratios(const SoftSegmentation& h) {
  const int N = h.n_pixels();
  const int K = h.n_classes;
  std::vector<double> p(K, 0.0);
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k) p[k] += h.at(n, k);
  for (int k = 0; k < K; ++k) p[k] /= N;
  return p;
}

VolumeVector soft_volumes(const SoftSegmentation& h) {
  const int N = h.n_pixels();
  const int K = h.n_classes;
  VolumeVector v;
  v.counts.assign(K, 0.0);
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k) v.counts[k] += h.at(n, k);
  return v;
}

HardMask hard_assign(const SoftSegmentation& h) {
  HardMask m;
  m.width = h.width;
  m.height = h.height;
  m.labels.resize(h.n_pixels());
  const int K = h.n_classes;
  parallel_for(h.n_pixels(), [&](std::int64_t n) {
    int best = 0;
    double bv = h.at(int(n), 0);
    for (int k = 1; k < K; ++k) {
      double v = h.at(int(n), k);
      if (v > bv) {
        bv = v;
        best = k;
      }
    }
    m.labels[n] = std::uint8_t(best);
  });
  return m;
}

SoftSegmentation one_hot(const HardMask& mask, int n_classes) {
  mask.validate(n_classes);
  SoftSegmentation h;
  h.width = mask.width;
  h.height = mask.height;
  h.n_classes = n_classes;
  h.probs.assign(std::size_t(mask.n_pixels()) * n_classes, 0.0);
  for (int n = 0; n < mask.n_pixels(); ++n) h.at(n, mask.labels[n]) = 1.0;
  return h;
}

std::vector<std::int64_t> label_histogram(const HardMask& mask, int n_classes) {
  mask.validate(n_classes);
  std::vector<std::int64_t> hist(n_classes, 0);
  for (auto l : mask.labels) ++hist[l];
  return hist;
}

VolumeVector mask_volumes(const HardMask& mask, int n_classes) {
  auto hist = label_histogram(mask, n_classes);
  VolumeVector v;
  v.counts.assign(hist.begin(), hist.end());
  return v;
}

}  // namespace vpseg
