#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "relayfl/errors.hpp"
#include "relayfl/random.hpp"

namespace relayfl {

using cplx = std::complex<double>;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct NodeLayout {
  Point2 ap{};
  std::vector<Point2> relays;
  std::vector<Point2> devices;

  std::size_t num_devices() const { return devices.size(); }
  std::size_t num_relays() const { return relays.size(); }
};

struct PathLossParams {
  double antenna_gain = 4.11;
  double carrier_freq = 915e6;
  double exponent = 3.0;
};

/// Complex gains for one coherence interval. g is stored row-major, K rows of N.
struct ChannelRealization {
  std::vector<cplx> h;
  std::vector<cplx> g;
  std::vector<cplx> f;
  std::size_t K = 0;
  std::size_t N = 0;

  ChannelRealization() = default;
  ChannelRealization(std::size_t k, std::size_t n) : h(k), g(k * n), f(n), K(k), N(n) {}

  cplx& gain(std::size_t k, std::size_t n) { return g[k * N + n]; }
  const cplx& gain(std::size_t k, std::size_t n) const { return g[k * N + n]; }
};

inline constexpr double kSpeedOfLight = 3e8;

inline void validate(const PathLossParams& p) {
  if (!(p.antenna_gain > 0.0) || !(p.carrier_freq > 0.0) || !(p.exponent > 0.0))
    throw DomainError("path loss parameters must be positive");
}

/// Free-space path loss G_A (c / (4 pi f_c d))^PL with c = 3e8 m/s.
inline double path_loss(double distance_m, const PathLossParams& params) {
  if (!(distance_m > 0.0)) throw DomainError("path_loss: distance must be positive");
  const double ratio = kSpeedOfLight / (4.0 * std::numbers::pi * params.carrier_freq * distance_m);
  return params.antenna_gain * std::pow(ratio, params.exponent);
}

inline cplx sample_small_scale(RandomStream& rng) { return rng.complex_normal(); }

inline void validate(const NodeLayout& layout) {
  if (layout.devices.empty()) throw DomainError("layout needs at least one device");
  for (const auto& d : layout.devices) {
    if (!(distance(d, layout.ap) > 0.0)) throw DomainError("device coincides with the AP");
    for (const auto& r : layout.relays)
      if (!(distance(d, r) > 0.0)) throw DomainError("device coincides with a relay");
  }
  for (const auto& r : layout.relays)
    if (!(distance(r, layout.ap) > 0.0)) throw DomainError("relay coincides with the AP");
}

/// Each gain is sqrt(path loss) times a unit CN(0,1) fading draw. Draw order:
/// h (per device), g (device-major), f (per relay).
inline ChannelRealization realize_channels(const NodeLayout& layout, const PathLossParams& params,
                                           RandomStream& rng) {
  validate(layout);
  const std::size_t K = layout.num_devices();
  const std::size_t N = layout.num_relays();
  ChannelRealization ch(K, N);
  for (std::size_t k = 0; k < K; ++k)
    ch.h[k] = std::sqrt(path_loss(distance(layout.devices[k], layout.ap), params)) * sample_small_scale(rng);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t n = 0; n < N; ++n)
      ch.gain(k, n) =
          std::sqrt(path_loss(distance(layout.devices[k], layout.relays[n]), params)) * sample_small_scale(rng);
  for (std::size_t n = 0; n < N; ++n)
    ch.f[n] = std::sqrt(path_loss(distance(layout.relays[n], layout.ap), params)) * sample_small_scale(rng);
  return ch;
}

/// Imperfect-CSI view: sqrt(g) (sqrt(kappa) h + sqrt(1 - kappa) n), n ~ CN(0,1).
/// `small_scale` is the unit-variance fading coefficient, not the full gain.
inline cplx apply_csi_error(cplx small_scale, double path_gain, double kappa, RandomStream& rng) {
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw DomainError("apply_csi_error: kappa must lie in [0, 1]");
  if (!(path_gain >= 0.0)) throw DomainError("apply_csi_error: path gain must be nonnegative");
  const cplx n = sample_small_scale(rng);
  return std::sqrt(path_gain) * (std::sqrt(kappa) * small_scale + std::sqrt(1.0 - kappa) * n);
}

/// Perturbs every coefficient of a realization. The true gains are split back
/// into path loss and fading using the layout distances.
inline ChannelRealization perceived_channels(const ChannelRealization& truth, const NodeLayout& layout,
                                             const PathLossParams& params, double kappa, RandomStream& rng) {
  ChannelRealization out(truth.K, truth.N);
  auto perturb = [&](cplx gain, double pl) {
    const double s = std::sqrt(pl);
    return apply_csi_error(gain / s, pl, kappa, rng);
  };
  for (std::size_t k = 0; k < truth.K; ++k)
    out.h[k] = perturb(truth.h[k], path_loss(distance(layout.devices[k], layout.ap), params));
  for (std::size_t k = 0; k < truth.K; ++k)
    for (std::size_t n = 0; n < truth.N; ++n)
      out.gain(k, n) = perturb(truth.gain(k, n), path_loss(distance(layout.devices[k], layout.relays[n]), params));
  for (std::size_t n = 0; n < truth.N; ++n)
    out.f[n] = perturb(truth.f[n], path_loss(distance(layout.relays[n], layout.ap), params));
  return out;
}

struct LineScenario {
  double x_relay = 50.0;
  double x_min = 80.0;
  double x_max = 120.0;
  double y_min = -60.0;
  double y_max = 60.0;
};

/// AP at the origin, all relays at (x_relay, 0), devices uniform in a rectangle.
inline NodeLayout line_layout(std::size_t num_devices, std::size_t num_relays, const LineScenario& s,
                              RandomStream& rng) {
  if (num_devices == 0) throw DomainError("line_layout: need at least one device");
  NodeLayout layout;
  layout.relays.assign(num_relays, Point2{s.x_relay, 0.0});
  layout.devices.reserve(num_devices);
  for (std::size_t k = 0; k < num_devices; ++k) {
    const double x = rng.uniform(s.x_min, s.x_max);
    const double y = rng.uniform(s.y_min, s.y_max);
    layout.devices.push_back({x, y});
  }
  return layout;
}

struct CellScenario {
  double cell_radius = 120.0;
  double relay_radius = 50.0;
  // Devices closer than this to the AP are redrawn so that every path loss stays finite.
  double min_device_distance = 1.0;
};

/// AP at the centre, relays equally spaced on a ring, devices uniform over the disc.
inline NodeLayout cell_layout(std::size_t num_devices, std::size_t num_relays, const CellScenario& s,
                              RandomStream& rng) {
  if (num_devices == 0) throw DomainError("cell_layout: need at least one device");
  NodeLayout layout;
  for (std::size_t n = 0; n < num_relays; ++n) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(num_relays);
    layout.relays.push_back({s.relay_radius * std::cos(angle), s.relay_radius * std::sin(angle)});
  }
  layout.devices.reserve(num_devices);
  while (layout.devices.size() < num_devices) {
    const double r = s.cell_radius * std::sqrt(rng.uniform(0.0, 1.0));
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    Point2 p{r * std::cos(angle), r * std::sin(angle)};
    bool ok = r >= s.min_device_distance;
    for (const auto& relay : layout.relays) ok = ok && distance(p, relay) >= s.min_device_distance;
    if (ok) layout.devices.push_back(p);
  }
  return layout;
}

} // namespace relayfl
