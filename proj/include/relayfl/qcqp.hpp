#pragma once

// Convex QCQP over the device transmit scalars (a1, a2) for fixed relay and
// receive scalars:
//
//   min  sum_k |theta_k a1_k + phi_k a2_k - rho_k|^2
//   s.t. |a1_k|^2 <= box1, |a2_k|^2 <= box2,
//        sum_k w_kn |a1_k|^2 <= cap_n        (one ellipsoid per active relay)
//
// Solved by accelerated projected gradient in the block-diagonal metric
// D = diag(|theta_k|^2 + |phi_k|^2). Projection onto the intersection is exact
// for one relay and uses Dykstra's alternating projections for more.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

namespace relayfl {

using cplx = std::complex<double>;

struct RelayEllipsoid {
  std::vector<double> weights; // |g_kn|^2 per device
  double cap = 0.0;            // P_r / |b_n|^2 - sigma^2
  double scale = 1.0;          // P_r / |b_n|^2, used for relative violation
};

struct DeviceQcqp {
  std::vector<cplx> theta;
  std::vector<cplx> phi;
  std::vector<double> rho;
  double box1 = 0.0;
  double box2 = 0.0;
  std::vector<RelayEllipsoid> relays;

  std::size_t size() const { return rho.size(); }

  double objective(const std::vector<cplx>& a1, const std::vector<cplx>& a2) const {
    double f = 0.0;
    for (std::size_t k = 0; k < size(); ++k) f += std::norm(theta[k] * a1[k] + phi[k] * a2[k] - rho[k]);
    return f;
  }

  double max_violation(const std::vector<cplx>& a1, const std::vector<cplx>& a2) const {
    double worst = -1.0;
    for (std::size_t k = 0; k < size(); ++k) {
      worst = std::max(worst, box1 > 0 ? std::norm(a1[k]) / box1 - 1.0 : std::norm(a1[k]));
      worst = std::max(worst, box2 > 0 ? std::norm(a2[k]) / box2 - 1.0 : std::norm(a2[k]));
    }
    for (const auto& e : relays) {
      double s = 0.0;
      for (std::size_t k = 0; k < size(); ++k) s += e.weights[k] * std::norm(a1[k]);
      worst = std::max(worst, (s - e.cap) / e.scale);
    }
    return worst;
  }
};

struct QcqpOptions {
  double tol = 1e-8;
  int max_iter = 5000;
  double projection_tol = 1e-10;
  int projection_max_cycles = 200;
};

struct QcqpResult {
  std::vector<cplx> a1;
  std::vector<cplx> a2;
  double objective = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

/// Projection onto {sum_k w_k |x_k|^2 <= cap} in the metric sum_k L_k |x_k - y_k|^2.
/// The minimiser is x_k = y_k L_k / (L_k + mu w_k); mu solves a monotone scalar equation.
inline void project_ellipsoid(std::vector<cplx>& x, const RelayEllipsoid& e, const std::vector<double>& metric) {
  const std::size_t K = x.size();
  double load = 0.0;
  for (std::size_t k = 0; k < K; ++k) load += e.weights[k] * std::norm(x[k]);
  if (load <= e.cap) return;
  if (e.cap <= 0.0) {
    for (std::size_t k = 0; k < K; ++k)
      if (e.weights[k] > 0.0) x[k] = 0.0;
    return;
  }
  // psi(mu) is convex and decreasing, so Newton from mu = 0 approaches the root from the left.
  double mu = 0.0;
  for (int it = 0; it < 200; ++it) {
    double psi = -e.cap;
    double dpsi = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      if (e.weights[k] == 0.0) continue;
      const double denom = metric[k] + mu * e.weights[k];
      const double shrink = metric[k] / denom;
      const double wy = e.weights[k] * std::norm(x[k]);
      psi += wy * shrink * shrink;
      dpsi -= 2.0 * wy * e.weights[k] * shrink * shrink / denom;
    }
    if (psi <= 1e-15 * e.cap || dpsi == 0.0) break;
    const double step = psi / -dpsi;
    mu += step;
    if (step <= 1e-16 * mu) break;
  }
  for (std::size_t k = 0; k < K; ++k) x[k] *= metric[k] / (metric[k] + mu * e.weights[k]);
}

inline void clip_disc(std::vector<cplx>& x, double box) {
  const double radius = std::sqrt(std::max(box, 0.0));
  for (auto& v : x) {
    const double m = std::abs(v);
    if (m > radius) v = radius > 0.0 ? v * (radius / m) : cplx{};
  }
}

/// Radially shrinks a1 so every ellipsoid holds exactly; discs stay satisfied.
inline void repair_feasibility(std::vector<cplx>& a1, const DeviceQcqp& p) {
  clip_disc(a1, p.box1);
  double factor = 1.0;
  for (const auto& e : p.relays) {
    double load = 0.0;
    for (std::size_t k = 0; k < a1.size(); ++k) load += e.weights[k] * std::norm(a1[k]);
    if (load > e.cap) factor = std::min(factor, e.cap > 0.0 ? std::sqrt(e.cap / load) : 0.0);
  }
  if (factor < 1.0)
    for (auto& v : a1) v *= factor;
}

/// Projection onto {|x_k|^2 <= box} intersected with one ellipsoid, in the same
/// metric. For a multiplier mu the minimiser is the shrunk point clipped to the
/// disc, x_k = clip(y_k L_k / (L_k + mu w_k)); mu is found by safeguarded Newton.
inline void project_capped_ellipsoid(std::vector<cplx>& x, const RelayEllipsoid& e, const std::vector<double>& metric,
                                     double box) {
  const std::size_t K = x.size();
  std::vector<cplx> clipped = x;
  clip_disc(clipped, box);
  double load = 0.0;
  for (std::size_t k = 0; k < K; ++k) load += e.weights[k] * std::norm(clipped[k]);
  if (load <= e.cap) {
    x.swap(clipped);
    return;
  }
  if (e.cap <= 0.0) {
    for (std::size_t k = 0; k < K; ++k)
      if (e.weights[k] > 0.0) x[k] = 0.0;
    return;
  }
  const double r2 = std::max(box, 0.0);
  // psi(mu) = load at mu minus cap: non-increasing, positive at 0.
  auto psi = [&](double mu, double* slope) {
    double v = -e.cap, d = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      if (e.weights[k] == 0.0) continue;
      const double denom = metric[k] + mu * e.weights[k];
      const double shrink = metric[k] / denom;
      const double m2 = std::norm(x[k]) * shrink * shrink;
      if (m2 >= r2) {
        v += e.weights[k] * r2;
      } else {
        v += e.weights[k] * m2;
        d -= 2.0 * e.weights[k] * e.weights[k] * m2 / denom;
      }
    }
    if (slope) *slope = d;
    return v;
  };
  double lo = 0.0, hi = 1.0;
  while (psi(hi, nullptr) > 0.0 && hi < 1e300) hi *= 4.0;
  double mu = 0.0;
  for (int it = 0; it < 200; ++it) {
    double slope = 0.0;
    const double v = psi(mu, &slope);
    if (std::abs(v) <= 1e-14 * e.cap) break;
    if (v > 0.0)
      lo = mu;
    else
      hi = mu;
    double next = slope < 0.0 ? mu - v / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo <= 1e-16 * hi) break;
    mu = next;
  }
  if (psi(mu, nullptr) > 1e-14 * e.cap) mu = hi; // stalled short of the root: take the feasible end
  const double radius = std::sqrt(r2);
  for (std::size_t k = 0; k < K; ++k) {
    x[k] *= metric[k] / (metric[k] + mu * e.weights[k]);
    const double m = std::abs(x[k]);
    if (m > radius) x[k] *= radius / m;
  }
}

/// Projection onto the feasible set. Each relay contributes the disc-capped
/// ellipsoid above; with one relay that is exact, with more Dykstra cycles
/// until the iterate stops moving.
class DykstraProjector {
public:
  DykstraProjector(const DeviceQcqp& problem, const std::vector<double>& metric, const QcqpOptions& opts)
      : p_(problem), metric_(metric), opts_(opts) {}

  void project(std::vector<cplx>& a1, std::vector<cplx>& a2) const {
    clip_disc(a2, p_.box2);
    if (p_.relays.empty()) {
      clip_disc(a1, p_.box1);
      return;
    }
    if (p_.relays.size() == 1) {
      project_capped_ellipsoid(a1, p_.relays[0], metric_, p_.box1);
      repair_feasibility(a1, p_);
      return;
    }
    const std::size_t K = a1.size();
    const std::size_t sets = p_.relays.size();
    std::vector<std::vector<cplx>> increments(sets, std::vector<cplx>(K));
    std::vector<cplx> z(K), previous;
    double scale = 0.0;
    for (std::size_t k = 0; k < K; ++k) scale += metric_[k] * p_.box1;
    for (int cycle = 0; cycle < opts_.projection_max_cycles; ++cycle) {
      previous = a1;
      for (std::size_t s = 0; s < sets; ++s) {
        for (std::size_t k = 0; k < K; ++k) z[k] = a1[k] + increments[s][k];
        std::vector<cplx> projected = z;
        project_capped_ellipsoid(projected, p_.relays[s], metric_, p_.box1);
        for (std::size_t k = 0; k < K; ++k) increments[s][k] = z[k] - projected[k];
        a1.swap(projected);
      }
      double moved = 0.0;
      for (std::size_t k = 0; k < K; ++k) moved += metric_[k] * std::norm(a1[k] - previous[k]);
      if (moved <= opts_.projection_tol * opts_.projection_tol * scale) break;
    }
    repair_feasibility(a1, p_);
  }

private:
  const DeviceQcqp& p_;
  const std::vector<double>& metric_;
  const QcqpOptions& opts_;
};

} // namespace detail

/// Solves the device QCQP starting from the feasible point (a1, a2). The
/// returned point is never worse than the starting point.
inline QcqpResult solve_device_qcqp(const DeviceQcqp& p, const std::vector<cplx>& a1_start,
                                    const std::vector<cplx>& a2_start, const QcqpOptions& opts = {}) {
  const std::size_t K = p.size();
  QcqpResult out;
  out.a1 = a1_start;
  out.a2 = a2_start;
  out.objective = p.objective(out.a1, out.a2);

  std::vector<double> curvature(K);
  double max_curv = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    curvature[k] = std::norm(p.theta[k]) + std::norm(p.phi[k]);
    max_curv = std::max(max_curv, curvature[k]);
  }
  if (max_curv == 0.0) {
    out.converged = true;
    return out;
  }
  // Flat devices get a tiny metric weight: the objective ignores them, so any feasible value is optimal.
  std::vector<double> metric(K);
  for (std::size_t k = 0; k < K; ++k) metric[k] = std::max(curvature[k], 1e-12 * max_curv);

  detail::DykstraProjector projector(p, metric, opts);

  auto gradient_step = [&](const std::vector<cplx>& y1, const std::vector<cplx>& y2, std::vector<cplx>& z1,
                           std::vector<cplx>& z2) {
    for (std::size_t k = 0; k < K; ++k) {
      const cplx r = p.theta[k] * y1[k] + p.phi[k] * y2[k] - p.rho[k];
      z1[k] = y1[k] - std::conj(p.theta[k]) * r / metric[k];
      z2[k] = y2[k] - std::conj(p.phi[k]) * r / metric[k];
    }
    projector.project(z1, z2);
  };
  auto metric_dist = [&](const std::vector<cplx>& u1, const std::vector<cplx>& u2, const std::vector<cplx>& v1,
                         const std::vector<cplx>& v2) {
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s += metric[k] * (std::norm(u1[k] - v1[k]) + std::norm(u2[k] - v2[k]));
    return std::sqrt(s);
  };
  auto residual_at = [&](const std::vector<cplx>& x1, const std::vector<cplx>& x2) {
    std::vector<cplx> z1(K), z2(K);
    gradient_step(x1, x2, z1, z2);
    return metric_dist(x1, x2, z1, z2);
  };

  std::vector<cplx> x1 = a1_start, x2 = a2_start;
  std::vector<cplx> y1 = x1, y2 = x2;
  std::vector<cplx> n1(K), n2(K);
  std::vector<cplx> best1 = x1, best2 = x2;
  double best = out.objective;
  double t = 1.0;
  int it = 0;
  bool converged = false;
  for (; it < opts.max_iter; ++it) {
    gradient_step(y1, y2, n1, n2);
    const double f = p.objective(n1, n2);
    if (f < best) {
      best = f;
      best1 = n1;
      best2 = n2;
    }
    if (metric_dist(y1, y2, n1, n2) <= opts.tol && residual_at(n1, n2) <= opts.tol) {
      converged = true;
      ++it;
      break;
    }
    // Gradient-based adaptive restart keeps the momentum from undoing progress.
    double restart_test = 0.0;
    for (std::size_t k = 0; k < K; ++k)
      restart_test += metric[k] * (std::real(std::conj(y1[k] - n1[k]) * (n1[k] - x1[k])) +
                                   std::real(std::conj(y2[k] - n2[k]) * (n2[k] - x2[k])));
    double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    double momentum = (t - 1.0) / t_next;
    if (restart_test > 0.0) {
      t_next = 1.0;
      momentum = 0.0;
    }
    for (std::size_t k = 0; k < K; ++k) {
      y1[k] = n1[k] + momentum * (n1[k] - x1[k]);
      y2[k] = n2[k] + momentum * (n2[k] - x2[k]);
    }
    x1.swap(n1);
    x2.swap(n2);
    t = t_next;
  }

  out.iterations = it;
  if (best < out.objective) {
    out.a1 = std::move(best1);
    out.a2 = std::move(best2);
    out.objective = best;
  }
  out.residual = residual_at(out.a1, out.a2);
  out.converged = converged || out.residual <= opts.tol;
  return out;
}

} // namespace relayfl
