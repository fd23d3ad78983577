#pragma once

// Brute-force reference solutions shared by unit and acceptance tests. Each
// one is derived independently of the library's solvers.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "relayfl/qcqp.hpp"

namespace oracle {

using relayfl::cplx;

/// Unrestricted minimum over (a, c) of sum_k |c h_k a_k - rho_k|^2 + |c|^2 s2
/// with |a_k|^2 <= p. For a fixed |c| the best a_k is the projection of
/// rho_k / (c h_k) onto the disc, leaving a hinge residual; the phase of c is
/// irrelevant. The remaining 1-D problem is scanned and then refined.
inline double norelay_brute_force(const std::vector<cplx>& h, const std::vector<double>& rho, double p, double s2,
                                  double c_max) {
  auto f = [&](double c) {
    double v = c * c * s2;
    for (std::size_t k = 0; k < h.size(); ++k) {
      const double gap = rho[k] - c * std::abs(h[k]) * std::sqrt(p);
      if (gap > 0.0) v += gap * gap;
    }
    return v;
  };
  const int grid = 20000;
  double best_c = 0.0, best = f(0.0);
  for (int i = 1; i <= grid; ++i) {
    const double c = c_max * i / grid;
    const double v = f(c);
    if (v < best) {
      best = v;
      best_c = c;
    }
  }
  double lo = std::max(0.0, best_c - c_max / grid), hi = best_c + c_max / grid;
  for (int it = 0; it < 200; ++it) {
    const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
    if (f(m1) < f(m2))
      hi = m2;
    else
      lo = m1;
  }
  return std::min(best, f(0.5 * (lo + hi)));
}

/// Minimum of the device QCQP for K <= 2 and at most one relay ellipsoid.
/// For fixed magnitudes |a1_k| = r_k, |a2_k| <= sqrt(box2) the reachable set of
/// theta a1 + phi a2 is a disc of radius |theta| r + |phi| sqrt(box2), so each
/// device contributes max(0, rho - radius)^2. The objective is non-increasing in
/// every r_k, so device 2 takes the largest radius the ellipsoid leaves it.
inline double device_qcqp_grid(const relayfl::DeviceQcqp& p) {
  const std::size_t K = p.size();
  const double s = std::sqrt(std::max(p.box2, 0.0));
  const double r_max = std::sqrt(std::max(p.box1, 0.0));
  auto term = [&](std::size_t k, double r) {
    const double gap = p.rho[k] - std::abs(p.theta[k]) * r - std::abs(p.phi[k]) * s;
    return gap > 0.0 ? gap * gap : 0.0;
  };
  const bool relay = !p.relays.empty();
  const auto weight = [&](std::size_t k) { return relay ? p.relays[0].weights[k] : 0.0; };
  const double cap = relay ? p.relays[0].cap : std::numeric_limits<double>::infinity();
  auto radius_limit = [&](std::size_t k, double budget) {
    if (weight(k) <= 0.0) return r_max;
    return std::min(r_max, std::sqrt(std::max(budget, 0.0) / weight(k)));
  };
  if (K == 1) return term(0, radius_limit(0, cap));

  auto value = [&](double r1) {
    const double left = cap - weight(0) * r1 * r1;
    return term(0, r1) + term(1, radius_limit(1, left));
  };
  const double r1_max = radius_limit(0, cap);
  const int grid = 200000;
  double best_r = 0.0, best = value(0.0);
  for (int i = 1; i <= grid; ++i) {
    const double r = r1_max * i / grid;
    const double v = value(r);
    if (v < best) {
      best = v;
      best_r = r;
    }
  }
  double lo = std::max(0.0, best_r - r1_max / grid), hi = std::min(r1_max, best_r + r1_max / grid);
  for (int it = 0; it < 200; ++it) {
    const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
    if (value(m1) < value(m2))
      hi = m2;
    else
      lo = m1;
  }
  return std::min(best, value(0.5 * (lo + hi)));
}

} // namespace oracle
