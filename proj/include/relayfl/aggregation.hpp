#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "relayfl/channel.hpp"
#include "relayfl/errors.hpp"
#include "relayfl/random.hpp"

namespace relayfl {

/// Aggregation weights rho_k = D_k / D.
class DeviceWeights {
public:
  DeviceWeights() = default;
  explicit DeviceWeights(std::vector<double> rho) : rho_(std::move(rho)) {
    if (rho_.empty()) throw DomainError("DeviceWeights: need at least one device");
    double sum = 0.0;
    for (double r : rho_) {
      if (!(r > 0.0)) throw DomainError("DeviceWeights: weights must be positive");
      sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw DomainError("DeviceWeights: weights must sum to one");
  }

  static DeviceWeights uniform(std::size_t K) { return DeviceWeights(std::vector<double>(K, 1.0 / K)); }

  /// Weights proportional to per-device sample counts.
  static DeviceWeights from_counts(std::span<const std::size_t> counts) {
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    std::vector<double> rho;
    rho.reserve(counts.size());
    for (auto c : counts) rho.push_back(static_cast<double>(c) / total);
    // Push the rounding residue into the largest entry so the sum is exact to ~1 ulp.
    double sum = std::accumulate(rho.begin(), rho.end(), 0.0);
    auto it = std::max_element(rho.begin(), rho.end());
    if (it != rho.end()) *it += 1.0 - sum;
    return DeviceWeights(std::move(rho));
  }

  std::size_t size() const { return rho_.size(); }
  double operator[](std::size_t k) const { return rho_[k]; }
  std::span<const double> values() const { return rho_; }

  double sum_of_squares() const {
    double s = 0.0;
    for (double r : rho_) s += r * r;
    return s;
  }

private:
  std::vector<double> rho_;
};

struct PowerBudget {
  double p0 = 0.05;      // per device, per phase [W]
  double pr = 0.1;       // per relay [W]
  double sigma2 = 1e-10; // noise power [W]

  void validate() const {
    if (!(p0 > 0.0) || !(pr > 0.0) || !(sigma2 > 0.0)) throw DomainError("PowerBudget entries must be positive");
  }
};

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

struct TransceiverConfig {
  std::vector<cplx> a1;
  std::vector<cplx> a2;
  std::vector<cplx> b;
  cplx c1{};
  cplx c2{};

  TransceiverConfig() = default;
  TransceiverConfig(std::size_t K, std::size_t N) : a1(K), a2(K), b(N) {}
};

struct NormalizationStats {
  std::vector<double> local_means;
  std::vector<double> local_vars;
  double global_mean = 0.0;
  double global_var = 0.0;
};

struct LocalStats {
  double mean = 0.0;
  double var = 0.0;
};

/// Entry mean and population variance (divisor d) of one local update.
inline LocalStats compute_local_stats(std::span<const double> delta) {
  if (delta.empty()) throw DomainError("compute_local_stats: empty update");
  const double d = static_cast<double>(delta.size());
  double mean = 0.0;
  for (double v : delta) mean += v;
  mean /= d;
  double var = 0.0;
  for (double v : delta) var += (v - mean) * (v - mean);
  return {mean, var / d};
}

struct GlobalStats {
  double mean = 0.0;
  double var = 0.0;
};

inline GlobalStats compute_global_stats(std::span<const LocalStats> local, const DeviceWeights& weights) {
  if (local.empty()) throw DomainError("compute_global_stats: no devices");
  if (local.size() != weights.size()) throw DomainError("compute_global_stats: weight/stat length mismatch");
  GlobalStats g;
  for (std::size_t k = 0; k < local.size(); ++k) {
    g.mean += weights[k] * local[k].mean;
    g.var += weights[k] * local[k].var;
  }
  return g;
}

inline NormalizationStats make_normalization_stats(std::span<const std::vector<double>> deltas,
                                                   const DeviceWeights& weights) {
  NormalizationStats s;
  std::vector<LocalStats> local;
  local.reserve(deltas.size());
  for (const auto& d : deltas) {
    local.push_back(compute_local_stats(d));
    s.local_means.push_back(local.back().mean);
    s.local_vars.push_back(local.back().var);
  }
  auto g = compute_global_stats(local, weights);
  s.global_mean = g.mean;
  s.global_var = g.var;
  return s;
}

inline std::vector<double> normalize(std::span<const double> delta, double global_mean, double global_std) {
  if (!(global_std > 0.0))
    throw DegenerateUpdateError("normalize: zero global spread (all local updates are identical constants)");
  std::vector<double> s(delta.size());
  for (std::size_t i = 0; i < delta.size(); ++i) s[i] = (delta[i] - global_mean) / global_std;
  return s;
}

inline double denormalize(double x_hat, double global_mean, double global_std) {
  return global_std * x_hat + global_mean;
}

struct NoRelayOptimum {
  std::vector<cplx> a;
  cplx c{};
  double mse = 0.0;
};

/// Minimum-MSE single-phase over-the-air aggregation with per-device budget
/// `p0_total`: perfect alignment at the smallest admissible receive scalar.
/// c is real positive; a_k absorbs the channel phase.
inline NoRelayOptimum norelay_optimum(std::span<const cplx> h, const DeviceWeights& weights, double p0_total,
                                      double sigma2) {
  if (h.size() != weights.size()) throw DomainError("norelay_optimum: channel/weight length mismatch");
  if (!(p0_total > 0.0)) throw DomainError("norelay_optimum: budget must be positive");
  double worst = 0.0;
  for (std::size_t k = 0; k < h.size(); ++k) {
    if (std::abs(h[k]) == 0.0) throw SingularChannelError("norelay_optimum: zero device-AP channel");
    worst = std::max(worst, weights[k] / std::abs(h[k]));
  }
  NoRelayOptimum out;
  out.c = cplx(worst / std::sqrt(p0_total), 0.0);
  out.a.resize(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) out.a[k] = weights[k] / (out.c * h[k]);
  out.mse = sigma2 / p0_total * worst * worst;
  return out;
}

/// Objective of the single-phase scheme for arbitrary (a, c).
inline double norelay_mse(std::span<const cplx> a, cplx c, std::span<const cplx> h, const DeviceWeights& weights,
                          double sigma2) {
  double mse = std::norm(c) * sigma2;
  for (std::size_t k = 0; k < h.size(); ++k) mse += std::norm(c * h[k] * a[k] - weights[k]);
  return mse;
}

/// Effective end-to-end coefficient of device k:
/// c1 h_k a1_k + c2 h_k a2_k + c2 a1_k sum_n f_n b_n g_kn.
inline cplx effective_gain(const TransceiverConfig& cfg, const ChannelRealization& ch, std::size_t k) {
  cplx relay{};
  for (std::size_t n = 0; n < ch.N; ++n) relay += ch.f[n] * cfg.b[n] * ch.gain(k, n);
  return cfg.c1 * ch.h[k] * cfg.a1[k] + cfg.c2 * ch.h[k] * cfg.a2[k] + cfg.c2 * cfg.a1[k] * relay;
}

inline double noise_gain(const TransceiverConfig& cfg, const ChannelRealization& ch) {
  double relay = 0.0;
  for (std::size_t n = 0; n < ch.N; ++n) relay += std::norm(ch.f[n]) * std::norm(cfg.b[n]);
  return std::norm(cfg.c1) + std::norm(cfg.c2) * (1.0 + relay);
}

/// Two-phase aggregation MSE: misalignment plus effective noise.
inline double relay_mse(const TransceiverConfig& cfg, const ChannelRealization& ch, const DeviceWeights& weights,
                        double sigma2) {
  double mse = 0.0;
  for (std::size_t k = 0; k < ch.K; ++k) mse += std::norm(effective_gain(cfg, ch, k) - weights[k]);
  return mse + noise_gain(cfg, ch) * sigma2;
}

/// Left-hand side of each relay's transmit power constraint.
inline std::vector<double> relay_power_used(const TransceiverConfig& cfg, const ChannelRealization& ch,
                                            double sigma2) {
  std::vector<double> used(ch.N);
  for (std::size_t n = 0; n < ch.N; ++n) {
    double rx = sigma2;
    for (std::size_t k = 0; k < ch.K; ++k) rx += std::norm(ch.gain(k, n)) * std::norm(cfg.a1[k]);
    used[n] = std::norm(cfg.b[n]) * rx;
  }
  return used;
}

/// Largest relative constraint violation; <= 0 means feasible. `phase1_budget`
/// lets the relay-only scheme use its doubled phase-1 budget.
inline double max_violation(const TransceiverConfig& cfg, const ChannelRealization& ch, const PowerBudget& budget,
                            double phase1_budget) {
  double worst = -1.0;
  for (std::size_t k = 0; k < ch.K; ++k) {
    worst = std::max(worst, std::norm(cfg.a1[k]) / phase1_budget - 1.0);
    worst = std::max(worst, std::norm(cfg.a2[k]) / budget.p0 - 1.0);
  }
  for (double used : relay_power_used(cfg, ch, budget.sigma2)) worst = std::max(worst, used / budget.pr - 1.0);
  return worst;
}

inline bool is_feasible(const TransceiverConfig& cfg, const ChannelRealization& ch, const PowerBudget& budget,
                        double slack = 1e-9) {
  return max_violation(cfg, ch, budget, budget.p0) <= slack;
}

/// Complex receiver output c1 y1 + c2 y2 for every symbol slot. `symbols` is
/// K rows of d entries. Noise draw order per slot: relay noises, z1, z2.
inline std::vector<cplx> simulate_round_complex(const TransceiverConfig& cfg, const ChannelRealization& ch,
                                                std::span<const std::vector<double>> symbols, double sigma2,
                                                RandomStream& rng) {
  if (symbols.size() != ch.K) throw DomainError("simulate_round: symbol rows must match device count");
  const std::size_t d = ch.K ? symbols[0].size() : 0;
  const double noise_std = std::sqrt(sigma2);
  std::vector<cplx> out(d);
  std::vector<cplx> relay_rx(ch.N);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t n = 0; n < ch.N; ++n) {
      cplx r = noise_std * rng.complex_normal();
      for (std::size_t k = 0; k < ch.K; ++k) r += ch.gain(k, n) * cfg.a1[k] * symbols[k][i];
      relay_rx[n] = r;
    }
    cplx y1 = noise_std * rng.complex_normal();
    cplx y2 = noise_std * rng.complex_normal();
    for (std::size_t k = 0; k < ch.K; ++k) {
      y1 += ch.h[k] * cfg.a1[k] * symbols[k][i];
      y2 += ch.h[k] * cfg.a2[k] * symbols[k][i];
    }
    for (std::size_t n = 0; n < ch.N; ++n) y2 += ch.f[n] * cfg.b[n] * relay_rx[n];
    out[i] = cfg.c1 * y1 + cfg.c2 * y2;
  }
  return out;
}

/// Real-valued estimate of sum_k rho_k s_k[i]; symbols are real, so the AP keeps the real part.
inline std::vector<double> simulate_round(const TransceiverConfig& cfg, const ChannelRealization& ch,
                                          std::span<const std::vector<double>> symbols, double sigma2,
                                          RandomStream& rng) {
  auto z = simulate_round_complex(cfg, ch, symbols, sigma2, rng);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i].real();
  return out;
}

/// Single-phase scheme expressed as a two-phase config: phase 2 and the relays are muted.
inline TransceiverConfig as_single_phase(const NoRelayOptimum& opt, std::size_t num_relays) {
  TransceiverConfig cfg(opt.a.size(), num_relays);
  cfg.a1 = opt.a;
  cfg.c1 = opt.c;
  return cfg;
}

} // namespace relayfl
