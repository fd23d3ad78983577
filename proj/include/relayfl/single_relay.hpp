#pragma once

// Single-relay analysis: SNR summaries, the two sufficient conditions under
// which relaying cannot hurt, and the explicit c1 = 0 construction that
// certifies the bound.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "relayfl/aggregation.hpp"
#include "relayfl/channel.hpp"
#include "relayfl/errors.hpp"

namespace relayfl {

struct SnrSummary {
  std::vector<double> snr_device_ap;
  std::vector<double> snr_device_relay;
  double snr_relay_ap = 0.0;
  double delta = 0.0; // min_k SNR_k / min_k SNR_k,relay
};

inline SnrSummary snr_summary(const ChannelRealization& ch, const PowerBudget& budget) {
  if (ch.N != 1) throw DomainError("snr_summary: exactly one relay required");
  SnrSummary s;
  s.snr_device_ap.resize(ch.K);
  s.snr_device_relay.resize(ch.K);
  for (std::size_t k = 0; k < ch.K; ++k) {
    s.snr_device_ap[k] = budget.p0 * std::norm(ch.h[k]) / budget.sigma2;
    s.snr_device_relay[k] = budget.p0 * std::norm(ch.gain(k, 0)) / budget.sigma2;
  }
  s.snr_relay_ap = budget.pr * std::norm(ch.f[0]) / budget.sigma2;
  const double min_direct = *std::min_element(s.snr_device_ap.begin(), s.snr_device_ap.end());
  const double min_relay = *std::min_element(s.snr_device_relay.begin(), s.snr_device_relay.end());
  if (!(min_relay > 0.0)) throw DomainError("snr_summary: delta undefined for a zero device-relay channel");
  s.delta = min_direct / min_relay;
  return s;
}

struct TheoremConditions {
  bool cond_40 = false;       // delta <= 1
  bool cond_41 = false;       // relay-AP SNR above the threshold
  bool cond_41_valid = false; // threshold is only real-valued when delta <= 1
  double threshold = std::numeric_limits<double>::quiet_NaN();

  bool both() const { return cond_40 && cond_41; }
};

/// SNR_relay-AP >= (K min_k SNR_k + delta) / (1 + sqrt(2 - 2 delta))^2, evaluated in linear units.
inline TheoremConditions check_theorem_conditions(const SnrSummary& s, std::size_t K) {
  TheoremConditions c;
  c.cond_40 = s.delta <= 1.0;
  if (!c.cond_40) return c;
  const double min_direct = *std::min_element(s.snr_device_ap.begin(), s.snr_device_ap.end());
  const double root = 1.0 + std::sqrt(2.0 - 2.0 * s.delta);
  c.threshold = (static_cast<double>(K) * min_direct + s.delta) / (root * root);
  c.cond_41_valid = true;
  c.cond_41 = s.snr_relay_ap >= c.threshold;
  return c;
}

enum class ConstructionCase { direct_limited, relay_limited };

struct AnalyticConstruction {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;     // |c2|^2 |b|^2
  double eta = 0.0;       // |c2|^2
  double alpha_bar = 0.0; // where the two bounds on eta cross
  TransceiverConfig config;
  double mse = 0.0;
  ConstructionCase branch = ConstructionCase::direct_limited;
};

/// c1 = 0 construction with uniform weights. The relayed copy carries a share
/// alpha of each weight and the phase-2 direct copy the rest; alpha = 1/2 when
/// that is admissible, otherwise the crossover point alpha_bar.
inline AnalyticConstruction analytic_construction(const ChannelRealization& ch, const PowerBudget& budget) {
  if (ch.N != 1) throw DomainError("analytic_construction: exactly one relay required");
  budget.validate();
  const std::size_t K = ch.K;
  if (K == 0) throw DomainError("analytic_construction: no devices");
  const double rho = 1.0 / static_cast<double>(K);
  const double f2 = std::norm(ch.f[0]);
  double min_h2 = std::numeric_limits<double>::infinity();
  double min_g2 = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < K; ++k) {
    min_h2 = std::min(min_h2, std::norm(ch.h[k]));
    min_g2 = std::min(min_g2, std::norm(ch.gain(k, 0)));
  }
  if (!(min_h2 > 0.0) || !(min_g2 > 0.0) || !(f2 > 0.0))
    throw SingularChannelError("analytic_construction: zero channel coefficient");

  const double p0 = budget.p0;
  const double pr = budget.pr;
  const double s2 = budget.sigma2;
  const double Kd = static_cast<double>(K);

  AnalyticConstruction out;
  out.alpha_bar = 1.0 / (1.0 + std::sqrt((Kd * p0 * min_g2 + s2) * min_h2 / (pr * f2 * min_g2)));
  out.alpha = std::min(0.5, out.alpha_bar);
  out.beta = 1.0 - out.alpha;
  out.gamma = out.alpha * out.alpha * rho * rho / (p0 * f2 * min_g2);
  const double eta_direct = out.beta * out.beta * rho * rho / (p0 * min_h2);
  const double eta_relay = (Kd * out.alpha * out.alpha * rho * rho + out.gamma * s2 * f2) / (pr * f2);
  out.eta = std::max(eta_direct, eta_relay);
  out.branch = out.alpha < out.alpha_bar ? ConstructionCase::direct_limited : ConstructionCase::relay_limited;
  out.mse = (out.eta + out.gamma * f2) * s2;

  // Phases: c2 real positive and f b real positive; a1, a2 absorb the rest.
  TransceiverConfig cfg(K, 1);
  const double c2 = std::sqrt(out.eta);
  const double b_mag = std::sqrt(out.gamma / out.eta);
  cfg.c1 = 0.0;
  cfg.c2 = c2;
  cfg.b[0] = b_mag * std::conj(ch.f[0]) / std::abs(ch.f[0]);
  const cplx relay_gain = cfg.c2 * ch.f[0] * cfg.b[0];
  for (std::size_t k = 0; k < K; ++k) {
    cfg.a1[k] = out.alpha * rho / (relay_gain * ch.gain(k, 0));
    cfg.a2[k] = out.beta * rho / (cfg.c2 * ch.h[k]);
  }
  out.config = std::move(cfg);
  return out;
}

/// Reference no-relay error for the same setting: single phase with budget 2 P0.
inline double norelay_reference_mse(const ChannelRealization& ch, const PowerBudget& budget) {
  return norelay_optimum(ch.h, DeviceWeights::uniform(ch.K), 2.0 * budget.p0, budget.sigma2).mse;
}

} // namespace relayfl
