#include "vpseg/nets.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "vpseg/io.hpp"
#include "vpseg/parallel.hpp"
#include "vpseg/rng.hpp"

namespace vpseg {

const ParamSlice& ParamVector::slice(const std::string& name) const {
  for (const auto& s : slices)
    if (s.name == name) return s;
  throw Error(ErrorKind::invalid_argument, "unknown parameter slice: " + name);
}

void save_params(const ParamVector& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(bool(out), ErrorKind::io, "cannot write " + path);
  std::vector<float> buf(p.data.begin(), p.data.end());
  out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size() * 4));
  require(bool(out), ErrorKind::io, "write failed: " + path);
  nlohmann::json manifest;
  manifest["total"] = p.size();
  manifest["slices"] = nlohmann::json::array();
  for (const auto& s : p.slices)
    manifest["slices"].push_back(
        {{"name", s.name}, {"offset", s.offset}, {"size", s.size}, {"shape", s.shape}});
  write_text_file(path + ".json", manifest.dump(2) + "\n");
}

ParamVector load_params(const std::string& path) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(path + ".json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::io, "bad parameter manifest for " + path + ": " + e.what());
  }
  ParamVector p;
  const int total = manifest.at("total").get<int>();
  for (const auto& js : manifest.at("slices")) {
    ParamSlice s;
    s.name = js.at("name").get<std::string>();
    s.offset = js.at("offset").get<int>();
    s.size = js.at("size").get<int>();
    s.shape = js.at("shape").get<std::vector<int>>();
    p.slices.push_back(std::move(s));
  }
  std::ifstream in(path, std::ios::binary);
  require(bool(in), ErrorKind::io, "cannot open " + path);
  std::vector<float> buf(total);
  in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(std::size_t(total) * 4));
  require(in.gcount() == std::streamsize(std::size_t(total) * 4), ErrorKind::io,
          "truncated parameter file: " + path);
  p.data.assign(buf.begin(), buf.end());
  return p;
}

namespace {

inline double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

inline double softplus_deriv(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void apply_activation(Activation act, const std::vector<double>& z, std::vector<double>& a) {
  a.resize(z.size());
  if (act == Activation::identity) {
    a = z;
    return;
  }
  for (std::size_t i = 0; i < z.size(); ++i) a[i] = softplus(z[i]);
}

void activation_backward(Activation act, const std::vector<double>& z, std::vector<double>& grad) {
  if (act == Activation::identity) return;
  for (std::size_t i = 0; i < z.size(); ++i) grad[i] *= softplus_deriv(z[i]);
}

void add_conv_slice(ParamVector& p, const std::string& base, int c_out, int c_in) {
  ParamSlice w{base + ".weight", p.size(), c_out * c_in * 9, {c_out, c_in, 3, 3}};
  p.data.resize(p.data.size() + w.size, 0.0);
  p.slices.push_back(w);
  ParamSlice b{base + ".bias", p.size(), c_out, {c_out}};
  p.data.resize(p.data.size() + b.size, 0.0);
  p.slices.push_back(b);
}

void xavier_fill(ParamVector& p, Rng& rng) {
  for (const auto& s : p.slices) {
    if (s.name.ends_with(".bias")) continue;
    int fan_in, fan_out;
    if (s.shape.size() == 4) {
      fan_in = s.shape[1] * s.shape[2] * s.shape[3];
      fan_out = s.shape[0] * s.shape[2] * s.shape[3];
    } else {
      fan_in = s.shape[1];
      fan_out = s.shape[0];
    }
    const double a = std::sqrt(6.0 / double(fan_in + fan_out));
    for (int i = 0; i < s.size; ++i) p.data[s.offset + i] = rng.uniform(-a, a);
  }
}

// 3x3 same convolution on channel-major planes, zero padding.
void conv3x3_forward(const double* in, int c_in, const double* w, const double* b, double* out,
                     int c_out, int width, int height) {
  const std::size_t N = std::size_t(width) * height;
  parallel_for(std::int64_t(c_out) * height, [&](std::int64_t idx) {
    const int co = int(idx / height);
    const int y = int(idx % height);
    double* orow = out + co * N + std::size_t(y) * width;
    for (int x = 0; x < width; ++x) orow[x] = b[co];
    for (int ci = 0; ci < c_in; ++ci) {
      const double* wker = w + ((co * c_in) + ci) * 9;
      const double* iplane = in + ci * N;
      for (int dy = -1; dy <= 1; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= height) continue;
        const double* irow = iplane + std::size_t(yy) * width;
        for (int dx = -1; dx <= 1; ++dx) {
          const double ww = wker[(dy + 1) * 3 + (dx + 1)];
          if (ww == 0.0) continue;
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(width, width - dx);
          for (int x = x0; x < x1; ++x) orow[x] += ww * irow[x + dx];
        }
      }
    }
  });
}

// Gradients w.r.t. input, weights and bias. Serial: accumulation overlaps.
void conv3x3_backward(const double* in, int c_in, const double* w, const double* gout, int c_out,
                      int width, int height, double* gin, double* gw, double* gb) {
  const std::size_t N = std::size_t(width) * height;
  if (gin) std::fill(gin, gin + c_in * N, 0.0);
  for (int co = 0; co < c_out; ++co) {
    const double* goplane = gout + co * N;
    for (std::size_t i = 0; i < N; ++i) gb[co] += goplane[i];
    for (int ci = 0; ci < c_in; ++ci) {
      const double* iplane = in + ci * N;
      double* giplane = gin ? gin + ci * N : nullptr;
      const double* wker = w + ((co * c_in) + ci) * 9;
      double* gwker = gw + ((co * c_in) + ci) * 9;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const double ww = wker[(dy + 1) * 3 + (dx + 1)];
          double acc = 0.0;
          for (int y = 0; y < height; ++y) {
            const int yy = y + dy;
            if (yy < 0 || yy >= height) continue;
            const double* gorow = goplane + std::size_t(y) * width;
            const double* irow = iplane + std::size_t(yy) * width;
            double* girow = giplane ? giplane + std::size_t(yy) * width : nullptr;
            const int x0 = std::max(0, -dx);
            const int x1 = std::min(width, width - dx);
            for (int x = x0; x < x1; ++x) {
              acc += gorow[x] * irow[x + dx];
              if (girow) girow[x + dx] += ww * gorow[x];
            }
          }
          gwker[(dy + 1) * 3 + (dx + 1)] += acc;
        }
    }
  }
}

// logits are produced pixel-major (N x K) from the channel-major planes
void planes_to_logits(const std::vector<double>& planes, int K, int width, int height, Logits& o) {
  const std::size_t N = std::size_t(width) * height;
  o.width = width;
  o.height = height;
  o.n_classes = K;
  o.v.resize(N * K);
  for (int k = 0; k < K; ++k)
    for (std::size_t n = 0; n < N; ++n) o.v[n * K + k] = planes[k * N + n];
}

void logit_grad_to_planes(const std::vector<double>& grad, int K, std::size_t N, std::vector<double>& planes) {
  planes.resize(N * K);
  for (int k = 0; k < K; ++k)
    for (std::size_t n = 0; n < N; ++n) planes[k * N + n] = grad[n * K + k];
}

}  // namespace

SegNetParams init_seg_net(const SegNetConfig& cfg, std::uint64_t seed) {
  require(cfg.n_classes >= 2 && cfg.c1 > 0 && cfg.c2 > 0, ErrorKind::invalid_argument,
          "bad segmentation net configuration");
  SegNetParams net;
  net.cfg = cfg;
  add_conv_slice(net.params, "conv1", cfg.c1, 1);
  add_conv_slice(net.params, "conv2", cfg.c2, cfg.c1);
  add_conv_slice(net.params, "conv3", cfg.n_classes, cfg.c2);
  Rng rng(seed);
  xavier_fill(net.params, rng);
  return net;
}

RegNetParams init_reg_net(const RegNetConfig& cfg, std::uint64_t seed) {
  require(cfg.n_classes >= 2 && cfg.c1 > 0 && cfg.c2 > 0, ErrorKind::invalid_argument,
          "bad regression net configuration");
  RegNetParams net;
  net.cfg = cfg;
  add_conv_slice(net.params, "conv1", cfg.c1, 1);
  add_conv_slice(net.params, "conv2", cfg.c2, cfg.c1);
  ParamSlice w{"head.weight", net.params.size(), cfg.n_classes * cfg.c2, {cfg.n_classes, cfg.c2}};
  net.params.data.resize(net.params.data.size() + w.size, 0.0);
  net.params.slices.push_back(w);
  ParamSlice b{"head.bias", net.params.size(), cfg.n_classes, {cfg.n_classes}};
  net.params.data.resize(net.params.data.size() + b.size, 0.0);
  net.params.slices.push_back(b);
  Rng rng(seed);
  xavier_fill(net.params, rng);
  return net;
}

Logits seg_logits(const SegNetParams& net, const Image& img, SegTape* tape) {
  img.validate();
  const auto& P = net.params;
  const int w = img.width, h = img.height;
  const std::size_t N = std::size_t(w) * h;
  const auto& c = net.cfg;

  std::vector<double> z1(c.c1 * N), a1, z2(c.c2 * N), a2, z3(std::size_t(c.n_classes) * N);
  conv3x3_forward(img.values.data(), 1, P.slice_data(P.slice("conv1.weight")),
                  P.slice_data(P.slice("conv1.bias")), z1.data(), c.c1, w, h);
  apply_activation(c.activation, z1, a1);
  conv3x3_forward(a1.data(), c.c1, P.slice_data(P.slice("conv2.weight")),
                  P.slice_data(P.slice("conv2.bias")), z2.data(), c.c2, w, h);
  apply_activation(c.activation, z2, a2);
  conv3x3_forward(a2.data(), c.c2, P.slice_data(P.slice("conv3.weight")),
                  P.slice_data(P.slice("conv3.bias")), z3.data(), c.n_classes, w, h);

  Logits o;
  planes_to_logits(z3, c.n_classes, w, h, o);
  if (tape) {
    tape->input = img.values;
    tape->width = w;
    tape->height = h;
    tape->z1 = std::move(z1);
    tape->a1 = std::move(a1);
    tape->z2 = std::move(z2);
    tape->a2 = std::move(a2);
    tape->logits = o;
    tape->consumed = false;
  }
  return o;
}

SoftSegmentation seg_forward(const SegNetParams& net, const Image& img, const VolumeVector& V,
                             const VPSTDConfig& cfg, SegTape* tape) {
  Logits o = seg_logits(net, img, tape);
  return td_regularized_solve(o, V, cfg, tape ? &tape->solver : nullptr);
}

std::vector<double> seg_backbone_backward(const SegNetParams& net, SegTape& tape,
                                          const std::vector<double>& grad_logits) {
  require(!tape.consumed, ErrorKind::state, "seg tape already consumed");
  tape.consumed = true;
  const auto& P = net.params;
  const auto& c = net.cfg;
  const int w = tape.width, h = tape.height;
  const std::size_t N = std::size_t(w) * h;

  std::vector<double> grad(P.size(), 0.0);
  std::vector<double> g3;
  logit_grad_to_planes(grad_logits, c.n_classes, N, g3);

  std::vector<double> ga2(c.c2 * N);
  conv3x3_backward(tape.a2.data(), c.c2, P.slice_data(P.slice("conv3.weight")), g3.data(),
                   c.n_classes, w, h, ga2.data(), grad.data() + P.slice("conv3.weight").offset,
                   grad.data() + P.slice("conv3.bias").offset);
  activation_backward(c.activation, tape.z2, ga2);

  std::vector<double> ga1(c.c1 * N);
  conv3x3_backward(tape.a1.data(), c.c1, P.slice_data(P.slice("conv2.weight")), ga2.data(), c.c2, w,
                   h, ga1.data(), grad.data() + P.slice("conv2.weight").offset,
                   grad.data() + P.slice("conv2.bias").offset);
  activation_backward(c.activation, tape.z1, ga1);

  conv3x3_backward(tape.input.data(), 1, P.slice_data(P.slice("conv1.weight")), ga1.data(), c.c1, w,
                   h, nullptr, grad.data() + P.slice("conv1.weight").offset,
                   grad.data() + P.slice("conv1.bias").offset);
  return grad;
}

std::vector<double> seg_backward(const SegNetParams& net, SegTape& tape,
                                 const std::vector<double>& grad_h) {
  require(tape.solver.valid(), ErrorKind::state, "seg tape has no usable solver state");
  Logits grad_o = vpstd_backward(grad_h, tape.solver);
  return seg_backbone_backward(net, tape, grad_o.v);
}

VolumeVector reg_forward(const RegNetParams& net, const Image& img, RegTape* tape) {
  img.validate();
  const auto& P = net.params;
  const auto& c = net.cfg;
  const int w = img.width, h = img.height;
  const std::size_t N = std::size_t(w) * h;

  std::vector<double> z1(c.c1 * N), a1, z2(c.c2 * N), a2;
  conv3x3_forward(img.values.data(), 1, P.slice_data(P.slice("conv1.weight")),
                  P.slice_data(P.slice("conv1.bias")), z1.data(), c.c1, w, h);
  apply_activation(c.activation, z1, a1);
  conv3x3_forward(a1.data(), c.c1, P.slice_data(P.slice("conv2.weight")),
                  P.slice_data(P.slice("conv2.bias")), z2.data(), c.c2, w, h);
  apply_activation(c.activation, z2, a2);

  std::vector<double> pooled(c.c2, 0.0);
  for (int ch = 0; ch < c.c2; ++ch) {
    double acc = 0.0;
    for (std::size_t n = 0; n < N; ++n) acc += a2[ch * N + n];
    pooled[ch] = acc / double(N);
  }

  const double* hw = P.slice_data(P.slice("head.weight"));
  const double* hb = P.slice_data(P.slice("head.bias"));
  std::vector<double> head(c.n_classes);
  for (int k = 0; k < c.n_classes; ++k) {
    double acc = hb[k];
    for (int ch = 0; ch < c.c2; ++ch) acc += hw[k * c.c2 + ch] * pooled[ch];
    head[k] = acc;
  }
  double m = *std::max_element(head.begin(), head.end());
  double z = 0.0;
  std::vector<double> p(c.n_classes);
  for (int k = 0; k < c.n_classes; ++k) {
    p[k] = std::exp(head[k] - m);
    z += p[k];
  }
  for (int k = 0; k < c.n_classes; ++k) p[k] /= z;

  if (tape) {
    tape->input = img.values;
    tape->width = w;
    tape->height = h;
    tape->z1 = std::move(z1);
    tape->a1 = std::move(a1);
    tape->z2 = std::move(z2);
    tape->a2 = std::move(a2);
    tape->pooled = pooled;
    tape->softmaxed = p;
    tape->consumed = false;
  }

  VolumeVector v;
  v.counts.resize(c.n_classes);
  for (int k = 0; k < c.n_classes; ++k) v.counts[k] = double(N) * p[k];
  return v;
}

std::vector<double> reg_backward(const RegNetParams& net, RegTape& tape,
                                 const std::vector<double>& grad_volumes) {
  require(!tape.consumed, ErrorKind::state, "reg tape already consumed");
  tape.consumed = true;
  const auto& P = net.params;
  const auto& c = net.cfg;
  const int w = tape.width, h = tape.height;
  const std::size_t N = std::size_t(w) * h;
  require(int(grad_volumes.size()) == c.n_classes, ErrorKind::invalid_argument,
          "reg_backward: gradient dimension mismatch");

  std::vector<double> grad(P.size(), 0.0);

  // V = N * softmax(head)
  const std::vector<double>& p = tape.softmaxed;
  double dot = 0.0;
  for (int k = 0; k < c.n_classes; ++k) dot += grad_volumes[k] * p[k];
  std::vector<double> ghead(c.n_classes);
  for (int k = 0; k < c.n_classes; ++k) ghead[k] = double(N) * p[k] * (grad_volumes[k] - dot);

  const double* hw = P.slice_data(P.slice("head.weight"));
  double* ghw = grad.data() + P.slice("head.weight").offset;
  double* ghb = grad.data() + P.slice("head.bias").offset;
  std::vector<double> gpooled(c.c2, 0.0);
  for (int k = 0; k < c.n_classes; ++k) {
    ghb[k] += ghead[k];
    for (int ch = 0; ch < c.c2; ++ch) {
      ghw[k * c.c2 + ch] += ghead[k] * tape.pooled[ch];
      gpooled[ch] += hw[k * c.c2 + ch] * ghead[k];
    }
  }

  std::vector<double> ga2(c.c2 * N);
  for (int ch = 0; ch < c.c2; ++ch)
    for (std::size_t n = 0; n < N; ++n) ga2[ch * N + n] = gpooled[ch] / double(N);
  activation_backward(c.activation, tape.z2, ga2);

  std::vector<double> ga1(c.c1 * N);
  conv3x3_backward(tape.a1.data(), c.c1, P.slice_data(P.slice("conv2.weight")), ga2.data(), c.c2, w,
                   h, ga1.data(), grad.data() + P.slice("conv2.weight").offset,
                   grad.data() + P.slice("conv2.bias").offset);
  activation_backward(c.activation, tape.z1, ga1);

  conv3x3_backward(tape.input.data(), 1, P.slice_data(P.slice("conv1.weight")), ga1.data(), c.c1, w,
                   h, nullptr, grad.data() + P.slice("conv1.weight").offset,
                   grad.data() + P.slice("conv1.bias").offset);
  return grad;
}

double GradReport::worst() const {
  double m = 0.0;
  for (const auto& s : slices) m = std::max(m, s.max_rel_err);
  return m;
}

GradReport grad_check(const std::function<double(const std::vector<double>&)>& loss,
                      const std::vector<double>& analytic_grad, const ParamVector& params,
                      double rtol, double step) {
  require(analytic_grad.size() == params.data.size(), ErrorKind::invalid_argument,
          "grad_check: gradient size mismatch");
  std::vector<double> fd(params.data.size());
  std::vector<double> theta = params.data;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double orig = theta[i];
    theta[i] = orig + step;
    const double up = loss(theta);
    theta[i] = orig - step;
    const double down = loss(theta);
    theta[i] = orig;
    fd[i] = (up - down) / (2.0 * step);
  }

  GradReport report;
  report.rtol = rtol;
  report.pass = true;
  double global_norm = 0.0;
  for (double v : fd) global_norm = std::max(global_norm, std::abs(v));
  for (const auto& s : params.slices) {
    double fd_norm = 0.0, err = 0.0, grad_norm = 0.0;
    for (int i = s.offset; i < s.offset + s.size; ++i) {
      fd_norm = std::max(fd_norm, std::abs(fd[i]));
      err = std::max(err, std::abs(fd[i] - analytic_grad[i]));
      grad_norm = std::max(grad_norm, std::abs(analytic_grad[i]));
    }
    GradSliceReport sr;
    sr.slice = s.name;
    sr.grad_norm = grad_norm;
    // the global floor keeps near-null slices (for instance a final bias
    // that the volume constraint cancels) from dividing noise by noise
    sr.max_rel_err = err / std::max({fd_norm, 1e-6 * global_norm, 1e-8});
    report.slices.push_back(sr);
    if (sr.max_rel_err > rtol) report.pass = false;
  }
  return report;
}

}  // namespace vpseg
