#include "vpseg/vpstd.hpp"

#include <algorithm>
#include <cmath>

#include "vpseg/parallel.hpp"

namespace vpseg {

void Logits::validate() const {
  require(width > 0 && height > 0, ErrorKind::invalid_argument, "logit dimensions must be positive");
  require(n_classes >= 2, ErrorKind::invalid_argument, "need at least two classes");
  require(v.size() == std::size_t(n_pixels()) * n_classes, ErrorKind::invalid_argument,
          "logit buffer size mismatch");
  for (double x : v)
    require(std::isfinite(x), ErrorKind::invalid_argument, "logits must be finite", x);
}

void VPSTDConfig::validate() const {
  require(epsilon > 0.0, ErrorKind::invalid_argument, "epsilon must be positive", epsilon);
  require(lambda >= 0.0, ErrorKind::invalid_argument, "lambda must be nonnegative", lambda);
  require(sinkhorn_tol > 0.0, ErrorKind::invalid_argument, "sinkhorn_tol must be positive", sinkhorn_tol);
  require(sinkhorn_max_iter > 0, ErrorKind::invalid_argument, "sinkhorn_max_iter must be positive");
  require(td_iters >= 0, ErrorKind::invalid_argument, "td_iters must be nonnegative");
  kernel.validate();
}

double suggest_epsilon(const Logits& o) {
  auto [lo, hi] = std::minmax_element(o.v.begin(), o.v.end());
  double range = *hi - *lo;
  return range > 0.0 ? 0.1 * range : 0.1;
}

namespace {

// Row softmax of (o + u)/eps. The last entry of each row is recomputed as
// 1 minus the others so rows sum to 1.0 exactly; per-pixel log-sum-exp
// values land in `lse` when requested.
void scaled_row_softmax(const Logits& o, const std::vector<double>& u, double eps,
                        std::vector<double>& h, std::vector<double>* lse) {
  const int N = o.n_pixels();
  const int K = o.n_classes;
  parallel_for(N, [&](std::int64_t n) {
    const double* on = o.v.data() + n * K;
    double* hn = h.data() + n * K;
    double m = -1e300;
    for (int k = 0; k < K; ++k) m = std::max(m, (on[k] + u[k]) / eps);
    double z = 0.0;
    for (int k = 0; k < K; ++k) {
      hn[k] = std::exp((on[k] + u[k]) / eps - m);
      z += hn[k];
    }
    if (lse) (*lse)[n] = m + std::log(z);
    for (int k = 0; k < K; ++k) hn[k] /= z;
    double partial = 0.0;
    for (int k = 0; k < K - 1; ++k) partial += hn[k];
    double last = 1.0 - partial;
    if (last >= 0.0) hn[K - 1] = last;
  });
}

void column_sums(const std::vector<double>& h, int N, int K, std::vector<double>& S) {
  S.assign(K, 0.0);
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k) S[k] += h[std::size_t(n) * K + k];
}

}  // namespace

ProjectionResult entropic_volume_projection(const Logits& o, const VolumeVector& V,
                                            const VPSTDConfig& cfg, SinkhornTrace* trace,
                                            ProjectionTape* tape) {
  o.validate();
  cfg.validate();
  const int N = o.n_pixels();
  const int K = o.n_classes;
  require(V.n_classes() == K, ErrorKind::invalid_argument, "volume vector class count mismatch");
  for (double c : V.counts)
    require(c > 0.0, ErrorKind::invalid_argument, "volume components must be positive", c);
  V.validate_as_target(N);

  const double eps = cfg.epsilon;
  std::vector<double> u(K, 0.0);
  std::vector<double> h(std::size_t(N) * K);
  std::vector<double> S;
  std::vector<double> lse_buf;
  if (trace) lse_buf.resize(N);

  if (tape) {
    tape->width = o.width;
    tape->height = o.height;
    tape->n_classes = K;
    tape->epsilon = eps;
    tape->h_steps.clear();
  }

  double resid = 0.0;
  for (int iter = 1; iter <= cfg.sinkhorn_max_iter; ++iter) {
    scaled_row_softmax(o, u, eps, h, trace ? &lse_buf : nullptr);
    if (tape) tape->h_steps.push_back(h);
    column_sums(h, N, K, S);
    resid = 0.0;
    for (int k = 0; k < K; ++k) resid = std::max(resid, std::abs(S[k] - V.counts[k]));
    if (trace) {
      double dual = 0.0;
      for (int k = 0; k < K; ++k) dual += u[k] * V.counts[k];
      double lse_sum = 0.0;
      for (int n = 0; n < N; ++n) lse_sum += lse_buf[n];
      dual -= eps * lse_sum;
      trace->residuals.push_back(resid);
      trace->dual_objectives.push_back(dual);
    }
    if (resid <= cfg.sinkhorn_tol) {
      ProjectionResult r;
      r.h.width = o.width;
      r.h.height = o.height;
      r.h.n_classes = K;
      r.h.probs = std::move(h);
      r.u.u = std::move(u);
      r.iterations = iter;
      return r;
    }
    // floor the sums so a fully underflowed column pushes u by a large
    // finite amount instead of producing infinities
    for (int k = 0; k < K; ++k)
      u[k] += eps * (std::log(V.counts[k]) - std::log(std::max(S[k], 1e-300)));
    const double u0 = u[0];
    for (int k = 0; k < K; ++k) u[k] -= u0;
  }
  throw Error(ErrorKind::no_convergence, "volume projection did not reach the marginal tolerance", resid);
}

namespace {

// lambda * (k*(1 - 2 h_k)) per class, using k*1 == 1 for the normalized kernel.
Logits td_cost_adjustment(const SoftSegmentation& h, const VPSTDConfig& cfg) {
  const int N = h.n_pixels();
  const int K = h.n_classes;
  Logits adj;
  adj.width = h.width;
  adj.height = h.height;
  adj.n_classes = K;
  adj.v.resize(std::size_t(N) * K);
  ScalarField f{h.width, h.height, std::vector<double>(N)};
  for (int k = 0; k < K; ++k) {
    for (int n = 0; n < N; ++n) f.values[n] = h.at(n, k);
    ScalarField conv = gaussian_convolve(f, cfg.kernel);
    for (int n = 0; n < N; ++n) adj.at(n, k) = cfg.lambda * (1.0 - 2.0 * conv.values[n]);
  }
  return adj;
}

}  // namespace

SoftSegmentation td_regularized_solve(const Logits& o, const VolumeVector& V, const VPSTDConfig& cfg,
                                      VPSTDTape* tape, std::vector<double>* energy_trace) {
  cfg.validate();
  if (tape) {
    tape->cfg = cfg;
    tape->projections.clear();
    tape->consumed = false;
  }

  ProjectionTape ptape;
  ProjectionResult r = entropic_volume_projection(o, V, cfg, nullptr, tape ? &ptape : nullptr);
  if (tape) tape->projections.push_back(std::move(ptape));
  if (energy_trace) energy_trace->push_back(std_energy(r.h, o, cfg));

  SoftSegmentation h = std::move(r.h);
  for (int t = 1; t <= cfg.td_iters; ++t) {
    Logits adjusted = o;
    if (cfg.lambda > 0.0) {
      Logits adj = td_cost_adjustment(h, cfg);
      for (std::size_t i = 0; i < adjusted.v.size(); ++i) adjusted.v[i] -= adj.v[i];
    }
    ProjectionTape pt;
    ProjectionResult rt = entropic_volume_projection(adjusted, V, cfg, nullptr, tape ? &pt : nullptr);
    if (tape) tape->projections.push_back(std::move(pt));
    if (energy_trace) energy_trace->push_back(std_energy(rt.h, o, cfg));
    h = std::move(rt.h);
  }
  return h;
}

double std_energy(const SoftSegmentation& h, const Logits& o, const VPSTDConfig& cfg) {
  const int N = h.n_pixels();
  const int K = h.n_classes;
  require(o.n_pixels() == N && o.n_classes == K, ErrorKind::invalid_argument,
          "energy operands have mismatched shapes");
  double data = 0.0, entropy = 0.0;
  for (int n = 0; n < N; ++n) {
    for (int k = 0; k < K; ++k) {
      const double p = h.at(n, k);
      data += -o.at(n, k) * p;
      if (p > 0.0) entropy += p * std::log(p);
    }
  }
  double td = 0.0;
  if (cfg.lambda > 0.0) {
    ScalarField f{h.width, h.height, std::vector<double>(N)};
    for (int k = 0; k < K; ++k) {
      for (int n = 0; n < N; ++n) f.values[n] = h.at(n, k);
      ScalarField conv = gaussian_convolve(f, cfg.kernel);
      for (int n = 0; n < N; ++n) td += h.at(n, k) * (1.0 - conv.values[n]);
    }
  }
  return data + cfg.epsilon * entropy + cfg.lambda * td;
}

namespace {

// VJP of h = row-softmax((o+u)/eps) from the cached probabilities: the
// upstream gradient lands in g_o (accumulated) and the column sums of the
// pre-scale gradient land in g_u. The exact row-sum absorb in the forward
// only shifts the upstream by a per-row constant, which this Jacobian
// annihilates, so using the cached rows is exact.
void softmax_vjp(const std::vector<double>& h, int N, int K, double eps,
                 const std::vector<double>& upstream, std::vector<double>& scratch,
                 std::vector<double>& g_o, std::vector<double>& g_u) {
  scratch.resize(std::size_t(N) * K);
  parallel_for(N, [&](std::int64_t n) {
    const double* p = h.data() + n * K;
    const double* g = upstream.data() + n * K;
    double* ds = scratch.data() + n * K;
    double dot = 0.0;
    for (int k = 0; k < K; ++k) dot += g[k] * p[k];
    for (int k = 0; k < K; ++k) ds[k] = p[k] * (g[k] - dot) / eps;
  });
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k) {
      const double d = scratch[std::size_t(n) * K + k];
      g_o[std::size_t(n) * K + k] += d;
      g_u[k] += d;
    }
}

// Gradient w.r.t. the projection's input logits: replays the recorded
// scaling iterations in reverse. u_0 == 0 is constant, so the potential
// gradient is dropped at the bottom of the chain.
std::vector<double> projection_backward(const ProjectionTape& tape, const std::vector<double>& upstream) {
  const int N = tape.width * tape.height;
  const int K = tape.n_classes;
  const double eps = tape.epsilon;
  const int T = int(tape.h_steps.size());
  std::vector<double> g_o(std::size_t(N) * K, 0.0);
  std::vector<double> g_u(K, 0.0);
  std::vector<double> scratch;

  softmax_vjp(tape.h_steps[T - 1], N, K, eps, upstream, scratch, g_o, g_u);

  std::vector<double> S(K);
  std::vector<double> ghi(std::size_t(N) * K);
  for (int i = T - 2; i >= 0; --i) {
    // u_{i+1} = gauge(u_i + eps*(ln V - ln S_i)), gauge(v) = v - v[0]*1
    double gsum = 0.0;
    for (int k = 0; k < K; ++k) gsum += g_u[k];
    std::vector<double> g_v(K);
    for (int k = 0; k < K; ++k) g_v[k] = g_u[k] - (k == 0 ? gsum : 0.0);

    column_sums(tape.h_steps[i], N, K, S);
    std::vector<double> g_S(K);
    for (int k = 0; k < K; ++k) g_S[k] = -eps * g_v[k] / S[k];

    // S_i = colsum(h_i): broadcast g_S to every pixel, then softmax VJP
    for (int n = 0; n < N; ++n)
      for (int k = 0; k < K; ++k) ghi[std::size_t(n) * K + k] = g_S[k];
    std::vector<double> g_ui = g_v;  // identity path through the update
    softmax_vjp(tape.h_steps[i], N, K, eps, ghi, scratch, g_o, g_ui);
    g_u = std::move(g_ui);
  }
  return g_o;
}

}  // namespace

Logits vpstd_backward(const std::vector<double>& grad_h, VPSTDTape& tape) {
  require(!tape.projections.empty(), ErrorKind::state, "vpstd_backward: missing forward tape");
  require(!tape.consumed, ErrorKind::state, "vpstd_backward: tape already consumed");
  tape.consumed = true;

  const ProjectionTape& p0 = tape.projections.front();
  const int N = p0.width * p0.height;
  const int K = p0.n_classes;
  require(grad_h.size() == std::size_t(N) * K, ErrorKind::invalid_argument,
          "vpstd_backward: gradient shape mismatch");

  Logits grad_o;
  grad_o.width = p0.width;
  grad_o.height = p0.height;
  grad_o.n_classes = K;
  grad_o.v.assign(std::size_t(N) * K, 0.0);

  std::vector<double> g = grad_h;
  for (int j = int(tape.projections.size()) - 1; j >= 0; --j) {
    std::vector<double> gin = projection_backward(tape.projections[j], g);
    // this projection saw logits o - lambda*(1 - 2 k*h_{j-1}); identity into o
    for (std::size_t i = 0; i < gin.size(); ++i) grad_o.v[i] += gin[i];
    if (j >= 1) {
      if (tape.cfg.lambda > 0.0) {
        // the +2 lambda k*h_{j-1} path; reflection padding makes the conv
        // non-self-adjoint, so use the exact adjoint
        ScalarField gk{p0.width, p0.height, std::vector<double>(N)};
        for (int k = 0; k < K; ++k) {
          for (int n = 0; n < N; ++n) gk.values[n] = gin[std::size_t(n) * K + k];
          ScalarField back = gaussian_convolve_adjoint(gk, tape.cfg.kernel);
          for (int n = 0; n < N; ++n) g[std::size_t(n) * K + k] = 2.0 * tape.cfg.lambda * back.values[n];
        }
      } else {
        std::fill(g.begin(), g.end(), 0.0);
      }
    }
  }
  return grad_o;
}

VolumeVector compute_v_emp(const std::vector<VolumeVector>& labeled_volumes) {
  require(!labeled_volumes.empty(), ErrorKind::invalid_argument, "compute_v_emp: empty volume list");
  const int K = labeled_volumes.front().n_classes();
  const double total0 = labeled_volumes.front().total();
  VolumeVector mean;
  mean.counts.assign(K, 0.0);
  for (const auto& v : labeled_volumes) {
    require(v.n_classes() == K, ErrorKind::invalid_argument, "compute_v_emp: class count mismatch");
    require(std::abs(v.total() - total0) <= 1e-6, ErrorKind::invalid_argument,
            "compute_v_emp: volumes sum to different pixel counts", v.total());
    for (int k = 0; k < K; ++k) mean.counts[k] += v.counts[k];
  }
  for (int k = 0; k < K; ++k) mean.counts[k] /= double(labeled_volumes.size());
  return mean;
}

}  // namespace vpseg
