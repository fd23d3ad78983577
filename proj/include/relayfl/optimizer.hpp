#pragma once

// Alternating minimisation of the two-phase aggregation MSE over the device
// transmit scalars, the relay amplification gains and the two AP receive
// scalars. Every block update is an exact minimiser or a guarded descent step,
// so the objective sequence is non-increasing.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "relayfl/aggregation.hpp"
#include "relayfl/channel.hpp"
#include "relayfl/errors.hpp"
#include "relayfl/qcqp.hpp"

namespace relayfl {

struct SolverConfig {
  int j_max = 100;
  double epsilon = 1e-4;
  double qcqp_tol = 1e-8;
  int qcqp_max_iter = 5000;

  void validate() const {
    if (j_max <= 0 || !(epsilon > 0.0) || !(qcqp_tol > 0.0) || qcqp_max_iter <= 0)
      throw DomainError("SolverConfig entries must be positive");
  }
};

enum class SchemeVariant {
  full,                 // proposed two-phase cooperative scheme
  relay_only,           // devices silent in phase 2, AP deaf in phase 1
  no_relay_singlephase, // classic over-the-air aggregation with budget 2 P0
};

inline const char* to_string(SchemeVariant v) {
  switch (v) {
  case SchemeVariant::full: return "full";
  case SchemeVariant::relay_only: return "relay_only";
  case SchemeVariant::no_relay_singlephase: return "no_relay_singlephase";
  }
  return "?";
}

enum class Termination { converged, max_iterations };

struct SolverWarnings {
  int qcqp_not_converged = 0;
  int relay_pinv_fallback = 0;
  int relay_update_skipped = 0;

  bool any() const { return qcqp_not_converged + relay_pinv_fallback + relay_update_skipped > 0; }
};

struct SolverTrace {
  std::vector<double> objectives; // objectives[0] is the initial MSE
  int iterations_run = 0;
  Termination terminated_by = Termination::max_iterations;
  SolverWarnings warnings;
};

struct SolveResult {
  TransceiverConfig config;
  SolverTrace trace;
};

namespace detail {

inline double phase1_budget(const PowerBudget& budget, SchemeVariant variant) {
  return variant == SchemeVariant::relay_only ? 2.0 * budget.p0 : budget.p0;
}

inline double worst_inverse_gain(std::span<const cplx> h, const DeviceWeights& w) {
  double worst = 0.0;
  for (std::size_t k = 0; k < h.size(); ++k) {
    if (std::abs(h[k]) == 0.0) throw SingularChannelError("zero device-AP channel");
    worst = std::max(worst, w[k] / std::abs(h[k]));
  }
  return worst;
}

inline void check_dims(const TransceiverConfig& cfg, const ChannelRealization& ch, const DeviceWeights& w) {
  if (cfg.a1.size() != ch.K || cfg.a2.size() != ch.K || cfg.b.size() != ch.N || w.size() != ch.K)
    throw DomainError("dimension mismatch between config, channels and weights");
}

/// sum_n f_n b_n g_kn for device k.
inline cplx relay_path(const TransceiverConfig& cfg, const ChannelRealization& ch, std::size_t k) {
  cplx s{};
  for (std::size_t n = 0; n < ch.N; ++n) s += ch.f[n] * cfg.b[n] * ch.gain(k, n);
  return s;
}

} // namespace detail

/// Channel-inversion start: aligned a1 = a2, relays at full power, c1 = c2.
inline TransceiverConfig init_config(const ChannelRealization& ch, const DeviceWeights& w, const PowerBudget& budget,
                                     SchemeVariant variant = SchemeVariant::full) {
  const double worst = detail::worst_inverse_gain(ch.h, w);
  TransceiverConfig cfg(ch.K, ch.N);
  const double p1 = detail::phase1_budget(budget, variant);
  for (std::size_t k = 0; k < ch.K; ++k) {
    cfg.a1[k] = std::sqrt(p1) * w[k] / (ch.h[k] * worst);
    cfg.a2[k] = variant == SchemeVariant::relay_only ? cplx{} : std::sqrt(budget.p0) * w[k] / (ch.h[k] * worst);
  }
  for (std::size_t n = 0; n < ch.N; ++n) {
    double rx = budget.sigma2;
    for (std::size_t k = 0; k < ch.K; ++k) rx += std::norm(ch.gain(k, n)) * std::norm(cfg.a1[k]);
    cfg.b[n] = std::sqrt(budget.pr / rx);
  }
  const double c = worst / (2.0 * std::sqrt(budget.p0));
  cfg.c1 = variant == SchemeVariant::relay_only ? cplx{} : cplx(c);
  cfg.c2 = c;
  return cfg;
}

struct DeviceUpdate {
  std::vector<cplx> a1;
  std::vector<cplx> a2;
  double objective = 0.0; // misalignment part only
  double residual = 0.0;
  bool converged = true;
};

/// Builds the device-scalar QCQP for the current relay and receive scalars.
inline DeviceQcqp device_subproblem(const TransceiverConfig& cfg, const ChannelRealization& ch, const DeviceWeights& w,
                                    const PowerBudget& budget, SchemeVariant variant = SchemeVariant::full) {
  DeviceQcqp p;
  p.theta.resize(ch.K);
  p.phi.resize(ch.K);
  p.rho.assign(w.values().begin(), w.values().end());
  for (std::size_t k = 0; k < ch.K; ++k) {
    p.theta[k] = cfg.c1 * ch.h[k] + cfg.c2 * detail::relay_path(cfg, ch, k);
    p.phi[k] = variant == SchemeVariant::relay_only ? cplx{} : cfg.c2 * ch.h[k];
  }
  p.box1 = detail::phase1_budget(budget, variant);
  p.box2 = variant == SchemeVariant::relay_only ? 0.0 : budget.p0;
  for (std::size_t n = 0; n < ch.N; ++n) {
    const double gain2 = std::norm(cfg.b[n]);
    if (gain2 == 0.0) continue;
    RelayEllipsoid e;
    e.weights.resize(ch.K);
    for (std::size_t k = 0; k < ch.K; ++k) e.weights[k] = std::norm(ch.gain(k, n));
    e.scale = budget.pr / gain2;
    e.cap = std::max(e.scale - budget.sigma2, 0.0);
    p.relays.push_back(std::move(e));
  }
  return p;
}

inline DeviceUpdate update_device_scalars(const TransceiverConfig& cfg, const ChannelRealization& ch,
                                          const DeviceWeights& w, const PowerBudget& budget,
                                          const SolverConfig& solver, SchemeVariant variant = SchemeVariant::full) {
  detail::check_dims(cfg, ch, w);
  const DeviceQcqp p = device_subproblem(cfg, ch, w, budget, variant);
  QcqpOptions opts;
  opts.tol = solver.qcqp_tol;
  opts.max_iter = solver.qcqp_max_iter;
  auto r = solve_device_qcqp(p, cfg.a1, cfg.a2, opts);
  return {std::move(r.a1), std::move(r.a2), r.objective, r.residual, r.converged};
}

/// Element-wise radial projection onto |b_n|^2 <= caps_n.
inline std::vector<cplx> project_relay_gains(std::span<const cplx> b_hat, std::span<const double> caps) {
  std::vector<cplx> b(b_hat.begin(), b_hat.end());
  for (std::size_t n = 0; n < b.size(); ++n) {
    const double radius = std::sqrt(std::max(caps[n], 0.0));
    const double m = std::abs(b[n]);
    if (m > radius) b[n] = b[n] / m * radius;
  }
  return b;
}

/// Per-relay gain bound P_r / (sum_k |g_kn|^2 |a1_k|^2 + sigma^2).
inline std::vector<double> relay_gain_caps(const TransceiverConfig& cfg, const ChannelRealization& ch,
                                           const PowerBudget& budget) {
  std::vector<double> caps(ch.N);
  for (std::size_t n = 0; n < ch.N; ++n) {
    double rx = budget.sigma2;
    for (std::size_t k = 0; k < ch.K; ++k) rx += std::norm(ch.gain(k, n)) * std::norm(cfg.a1[k]);
    caps[n] = budget.pr / rx;
  }
  return caps;
}

struct RelayUpdate {
  std::vector<cplx> b;
  std::vector<cplx> b_unconstrained; // closed-form stationary point before projection
  bool pinv_fallback = false;
  bool refined = false; // projection alone was not optimal and was polished
};

namespace detail {

using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

/// Hermitian form of the relay-gain subproblem: objective b^H H b - 2 Re(r^H b) + const.
struct RelayQuadratic {
  CMat H;
  CVec r;
};

inline RelayQuadratic relay_quadratic(const TransceiverConfig& cfg, const ChannelRealization& ch,
                                      const DeviceWeights& w, double sigma2) {
  const auto N = static_cast<Eigen::Index>(ch.N);
  RelayQuadratic q{CMat::Zero(N, N), CVec::Zero(N)};
  CVec u(N);
  for (std::size_t k = 0; k < ch.K; ++k) {
    for (std::size_t n = 0; n < ch.N; ++n) u(static_cast<Eigen::Index>(n)) = cfg.c2 * cfg.a1[k] * ch.gain(k, n) * ch.f[n];
    const cplx v = cfg.c1 * ch.h[k] * cfg.a1[k] + cfg.c2 * ch.h[k] * cfg.a2[k] - w[k];
    q.H += u.conjugate() * u.transpose();
    q.r -= u.conjugate() * v;
  }
  for (std::size_t n = 0; n < ch.N; ++n)
    q.H(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) += std::norm(cfg.c2) * sigma2 * std::norm(ch.f[n]);
  return q;
}

/// Accelerated projected gradient on the disc-constrained relay subproblem.
inline std::vector<cplx> polish_relay_gains(const RelayQuadratic& q, std::vector<cplx> start,
                                            std::span<const double> caps) {
  const auto N = static_cast<Eigen::Index>(start.size());
  Eigen::SelfAdjointEigenSolver<CMat> eig(q.H, Eigen::EigenvaluesOnly);
  const double lmax = eig.eigenvalues().maxCoeff();
  if (!(lmax > 0.0)) return start;
  auto to_vec = [&](const std::vector<cplx>& b) {
    CVec v(N);
    for (Eigen::Index n = 0; n < N; ++n) v(n) = b[static_cast<std::size_t>(n)];
    return v;
  };
  auto step = [&](const CVec& y) {
    CVec z = y - (q.H * y - q.r) / lmax;
    std::vector<cplx> zs(z.data(), z.data() + N);
    return to_vec(project_relay_gains(zs, caps));
  };
  CVec x = to_vec(start);
  CVec y = x;
  double t = 1.0;
  for (int it = 0; it < 20000; ++it) {
    CVec xn = step(y);
    const double moved = (xn - y).norm();
    if (moved <= 1e-15 * (1.0 + xn.norm())) {
      x = xn;
      break;
    }
    double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    double momentum = (t - 1.0) / t_next;
    if ((y - xn).dot(xn - x).real() > 0.0) {
      t_next = 1.0;
      momentum = 0.0;
    }
    y = xn + momentum * (xn - x);
    x = xn;
    t = t_next;
  }
  return std::vector<cplx>(x.data(), x.data() + N);
}

} // namespace detail

/// Relay gains: closed-form stationary point of the unconstrained subproblem,
/// then radial projection onto each relay's power bound. For N > 1 an active
/// projection is not the constrained optimum in general, so the projected
/// point is polished by projected gradient.
inline RelayUpdate update_relay_scalars(const TransceiverConfig& cfg, const ChannelRealization& ch,
                                        const DeviceWeights& w, const PowerBudget& budget) {
  detail::check_dims(cfg, ch, w);
  if (cfg.c2 == cplx{}) throw DomainError("update_relay_scalars: requires c2 != 0");
  using detail::CMat;
  using detail::CVec;
  const auto N = static_cast<Eigen::Index>(ch.N);
  RelayUpdate out;
  if (N == 0) return out;

  CMat gram = CMat::Zero(N, N);
  CVec rhs = CVec::Zero(N);
  CVec gk(N);
  for (std::size_t k = 0; k < ch.K; ++k) {
    for (Eigen::Index n = 0; n < N; ++n) gk(n) = ch.gain(k, static_cast<std::size_t>(n));
    gram += std::norm(cfg.a1[k]) * gk.conjugate() * gk.transpose();
    const cplx resid = w[k] - ch.h[k] * (cfg.c1 * cfg.a1[k] + cfg.c2 * cfg.a2[k]);
    rhs += resid * std::conj(cfg.a1[k]) * gk.conjugate();
  }
  gram += budget.sigma2 * CMat::Identity(N, N);
  CVec fvec(N);
  for (Eigen::Index n = 0; n < N; ++n) fvec(n) = ch.f[static_cast<std::size_t>(n)];
  const CMat system = cfg.c2 * gram * fvec.asDiagonal();

  Eigen::FullPivLU<CMat> lu(system);
  lu.setThreshold(1e-13);
  CVec b_hat;
  if (lu.isInvertible()) {
    b_hat = lu.solve(rhs);
  } else {
    // Zero relay-AP channels: those gains do not affect the objective; take the minimum-norm stationary point.
    const auto q = detail::relay_quadratic(cfg, ch, w, budget.sigma2);
    b_hat = q.H.completeOrthogonalDecomposition().solve(q.r);
    out.pinv_fallback = true;
  }
  out.b_unconstrained.assign(b_hat.data(), b_hat.data() + N);

  const auto caps = relay_gain_caps(cfg, ch, budget);
  out.b = project_relay_gains(out.b_unconstrained, caps);
  bool clipped = false;
  for (std::size_t n = 0; n < ch.N; ++n) clipped = clipped || out.b[n] != out.b_unconstrained[n];
  if (clipped && ch.N > 1) {
    const auto q = detail::relay_quadratic(cfg, ch, w, budget.sigma2);
    out.b = detail::polish_relay_gains(q, out.b, caps);
    out.refined = true;
  }
  return out;
}

/// Optimal phase-1 receive scalar for fixed transmit and relay scalars and c2.
inline cplx update_c1(const TransceiverConfig& cfg, const ChannelRealization& ch, const DeviceWeights& w,
                      double sigma2) {
  cplx num{};
  double den = sigma2;
  for (std::size_t k = 0; k < ch.K; ++k) {
    const cplx rest = cfg.c2 * (ch.h[k] * cfg.a2[k] + cfg.a1[k] * detail::relay_path(cfg, ch, k));
    const cplx direct = ch.h[k] * cfg.a1[k];
    num += (w[k] - rest) * std::conj(direct);
    den += std::norm(direct);
  }
  return num / den;
}

/// Optimal phase-2 receive scalar for fixed transmit and relay scalars and c1.
inline cplx update_c2(const TransceiverConfig& cfg, const ChannelRealization& ch, const DeviceWeights& w,
                      double sigma2) {
  cplx num{};
  double relay_noise = 0.0;
  for (std::size_t n = 0; n < ch.N; ++n) relay_noise += std::norm(ch.f[n]) * std::norm(cfg.b[n]);
  double den = (1.0 + relay_noise) * sigma2;
  for (std::size_t k = 0; k < ch.K; ++k) {
    const cplx q = ch.h[k] * cfg.a2[k] + cfg.a1[k] * detail::relay_path(cfg, ch, k);
    num += (w[k] - cfg.c1 * ch.h[k] * cfg.a1[k]) * std::conj(q);
    den += std::norm(q);
  }
  return num / den;
}

/// Alternating minimisation: device scalars, relay gains, c1, c2, repeated
/// until the relative MSE improvement drops to epsilon or j_max sweeps ran.
/// The single-phase variant has a closed-form optimum and returns immediately.
inline SolveResult solve(const ChannelRealization& ch, const DeviceWeights& w, const PowerBudget& budget,
                         const SolverConfig& solver, SchemeVariant variant = SchemeVariant::full,
                         const std::optional<TransceiverConfig>& warm_start = std::nullopt) {
  budget.validate();
  solver.validate();
  SolveResult res;
  auto& trace = res.trace;

  if (variant == SchemeVariant::no_relay_singlephase) {
    auto opt = norelay_optimum(ch.h, w, 2.0 * budget.p0, budget.sigma2);
    res.config = as_single_phase(opt, ch.N);
    trace.objectives.push_back(relay_mse(res.config, ch, w, budget.sigma2));
    trace.terminated_by = Termination::converged;
    return res;
  }

  TransceiverConfig cfg = warm_start ? *warm_start : init_config(ch, w, budget, variant);
  detail::check_dims(cfg, ch, w);
  if (variant == SchemeVariant::relay_only) {
    std::fill(cfg.a2.begin(), cfg.a2.end(), cplx{});
    cfg.c1 = cplx{};
  }
  double prev = relay_mse(cfg, ch, w, budget.sigma2);
  trace.objectives.push_back(prev);

  for (int j = 1; j <= solver.j_max; ++j) {
    auto dev = update_device_scalars(cfg, ch, w, budget, solver, variant);
    if (!dev.converged) ++trace.warnings.qcqp_not_converged;
    {
      TransceiverConfig candidate = cfg;
      candidate.a1 = std::move(dev.a1);
      candidate.a2 = std::move(dev.a2);
      if (relay_mse(candidate, ch, w, budget.sigma2) <= relay_mse(cfg, ch, w, budget.sigma2)) cfg = std::move(candidate);
    }

    if (ch.N > 0) {
      if (cfg.c2 == cplx{}) {
        ++trace.warnings.relay_update_skipped;
      } else {
        auto rel = update_relay_scalars(cfg, ch, w, budget);
        if (rel.pinv_fallback) ++trace.warnings.relay_pinv_fallback;
        TransceiverConfig candidate = cfg;
        candidate.b = std::move(rel.b);
        if (relay_mse(candidate, ch, w, budget.sigma2) <= relay_mse(cfg, ch, w, budget.sigma2)) cfg = std::move(candidate);
      }
    }

    if (variant != SchemeVariant::relay_only) cfg.c1 = update_c1(cfg, ch, w, budget.sigma2);
    cfg.c2 = update_c2(cfg, ch, w, budget.sigma2);

    const double mse = relay_mse(cfg, ch, w, budget.sigma2);
    trace.objectives.push_back(mse);
    trace.iterations_run = j;
    if (std::isinf(solver.epsilon) || std::abs(mse - prev) <= solver.epsilon * std::abs(mse)) {
      trace.terminated_by = Termination::converged;
      break;
    }
    prev = mse;
  }
  res.config = std::move(cfg);
  return res;
}

} // namespace relayfl
