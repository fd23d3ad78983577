#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "relayfl/qcqp.hpp"
#include "relayfl/random.hpp"

using namespace relayfl;

namespace {

DeviceQcqp random_problem(std::size_t K, std::size_t relays, RandomStream& rng, double scale = 1.0) {
  DeviceQcqp p;
  for (std::size_t k = 0; k < K; ++k) {
    p.theta.push_back(scale * rng.complex_normal());
    p.phi.push_back(scale * rng.complex_normal());
    p.rho.push_back(1.0 / static_cast<double>(K));
  }
  p.box1 = rng.uniform(0.05, 1.0);
  p.box2 = rng.uniform(0.05, 1.0);
  for (std::size_t n = 0; n < relays; ++n) {
    RelayEllipsoid e;
    for (std::size_t k = 0; k < K; ++k) e.weights.push_back(rng.uniform(0.1, 2.0));
    e.scale = rng.uniform(0.05, 1.0);
    e.cap = e.scale * 0.9;
    p.relays.push_back(e);
  }
  return p;
}

} // namespace

TEST(EllipsoidProjection, LandsOnTheBoundaryWithKktStructure) {
  RandomStream rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t K = 1 + trial % 5;
    RelayEllipsoid e;
    std::vector<double> metric;
    std::vector<cplx> y;
    for (std::size_t k = 0; k < K; ++k) {
      e.weights.push_back(rng.uniform(0.1, 3.0));
      metric.push_back(rng.uniform(0.2, 5.0));
      y.push_back(2.0 * rng.complex_normal());
    }
    e.cap = 0.05;
    e.scale = 0.05;
    auto x = y;
    detail::project_ellipsoid(x, e, metric);
    double load = 0.0;
    for (std::size_t k = 0; k < K; ++k) load += e.weights[k] * std::norm(x[k]);
    EXPECT_NEAR(load, e.cap, 1e-10);
    // x_k = y_k L_k / (L_k + mu w_k) with one common mu >= 0.
    double mu = -1.0;
    for (std::size_t k = 0; k < K; ++k) {
      EXPECT_NEAR(std::arg(x[k]), std::arg(y[k]), 1e-9);
      const double mu_k = metric[k] * (std::abs(y[k]) / std::abs(x[k]) - 1.0) / e.weights[k];
      if (mu < 0) mu = mu_k;
      EXPECT_NEAR(mu_k, mu, 1e-6 * std::max(1.0, mu));
    }
  }
}

TEST(EllipsoidProjection, InteriorPointsAreUntouched) {
  RelayEllipsoid e{{1.0, 1.0}, 10.0, 10.0};
  std::vector<cplx> x{cplx(1, 1), cplx(0.5, -0.5)};
  const auto before = x;
  detail::project_ellipsoid(x, e, {1.0, 1.0});
  EXPECT_EQ(x, before);
}

TEST(CappedEllipsoidProjection, SingleDeviceIsARadialClip) {
  RandomStream rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    RelayEllipsoid e{{rng.uniform(0.1, 2.0)}, 0.0, rng.uniform(0.05, 1.0)};
    e.cap = 0.9 * e.scale;
    const double box = rng.uniform(0.05, 1.0);
    std::vector<cplx> x{2.0 * rng.complex_normal()};
    const auto y = x;
    detail::project_capped_ellipsoid(x, e, {rng.uniform(0.1, 3.0)}, box);
    const double expected = std::min({std::abs(y[0]), std::sqrt(box), std::sqrt(e.cap / e.weights[0])});
    EXPECT_NEAR(std::abs(x[0]), expected, 1e-12);
    EXPECT_NEAR(std::arg(x[0]), std::arg(y[0]), 1e-12);
  }
}

TEST(CappedEllipsoidProjection, IsIdempotentAndFeasible) {
  RandomStream rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t K = 1 + trial % 6;
    RelayEllipsoid e;
    std::vector<double> metric;
    std::vector<cplx> x;
    for (std::size_t k = 0; k < K; ++k) {
      e.weights.push_back(rng.uniform(0.1, 2.0));
      metric.push_back(rng.uniform(0.1, 3.0));
      x.push_back(rng.complex_normal());
    }
    e.scale = rng.uniform(0.05, 1.0);
    e.cap = 0.9 * e.scale;
    const double box = rng.uniform(0.05, 1.0);
    detail::project_capped_ellipsoid(x, e, metric, box);
    double load = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      EXPECT_LE(std::norm(x[k]), box * (1 + 1e-12));
      load += e.weights[k] * std::norm(x[k]);
    }
    EXPECT_LE(load, e.cap * (1 + 1e-12));
    auto again = x;
    detail::project_capped_ellipsoid(again, e, metric, box);
    for (std::size_t k = 0; k < K; ++k) EXPECT_NEAR(std::abs(again[k] - x[k]), 0.0, 1e-12);
  }
}

TEST(DeviceQcqp, UnconstrainedLineOfOptimaReachesZero) {
  DeviceQcqp p;
  p.theta = {1.0};
  p.phi = {1.0};
  p.rho = {1.0};
  p.box1 = 1e6;
  p.box2 = 1e6;
  const auto r = solve_device_qcqp(p, {0.0}, {0.0});
  EXPECT_NEAR(p.objective(r.a1, r.a2), 0.0, 1e-8);
  EXPECT_NEAR(std::abs(r.a1[0] + r.a2[0] - 1.0), 0.0, 1e-4);
  EXPECT_TRUE(r.converged);
}

TEST(DeviceQcqp, FlatObjectiveReturnsTheStart) {
  DeviceQcqp p;
  p.theta = {0.0, 0.0};
  p.phi = {0.0, 0.0};
  p.rho = {0.5, 0.5};
  p.box1 = p.box2 = 1.0;
  const std::vector<cplx> a1{0.3, cplx(0, 0.2)}, a2{0.1, 0.0};
  const auto r = solve_device_qcqp(p, a1, a2);
  EXPECT_EQ(r.a1, a1);
  EXPECT_EQ(r.a2, a2);
}

TEST(DeviceQcqp, FeasibleAndNeverWorseThanTheStart) {
  RandomStream rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t K = 1 + trial % 8, relays = trial % 4;
    auto p = random_problem(K, relays, rng);
    std::vector<cplx> a1(K), a2(K);
    const auto r = solve_device_qcqp(p, a1, a2);
    EXPECT_LE(p.max_violation(r.a1, r.a2), 1e-9);
    EXPECT_LE(r.objective, p.objective(a1, a2) + 1e-15);
    EXPECT_NEAR(r.objective, p.objective(r.a1, r.a2), 1e-14);
  }
}

TEST(DeviceQcqp, MatchesGridOracle) {
  RandomStream rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t K = 1 + trial % 2, relays = (trial / 2) % 2;
    // Small gains keep the boxes active so the optimum is strictly positive.
    auto p = random_problem(K, relays, rng, 0.4);
    const auto r = solve_device_qcqp(p, std::vector<cplx>(K), std::vector<cplx>(K));
    const double ref = oracle::device_qcqp_grid(p);
    EXPECT_LE(p.max_violation(r.a1, r.a2), 1e-9);
    EXPECT_NEAR(r.objective, ref, 1e-4 * std::max(ref, 1e-6)) << "trial " << trial;
  }
}

TEST(DeviceQcqp, RandomFeasiblePointsDoNotBeatTheSolution) {
  RandomStream rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t K = 3, relays = 2;
    auto p = random_problem(K, relays, rng, 0.5);
    const auto r = solve_device_qcqp(p, std::vector<cplx>(K), std::vector<cplx>(K));
    for (int s = 0; s < 2000; ++s) {
      std::vector<cplx> a1(K), a2(K);
      for (std::size_t k = 0; k < K; ++k) {
        a1[k] = std::polar(std::sqrt(p.box1) * std::sqrt(rng.uniform(0, 1)), rng.uniform(0, 6.283185307179586));
        a2[k] = std::polar(std::sqrt(p.box2) * std::sqrt(rng.uniform(0, 1)), rng.uniform(0, 6.283185307179586));
      }
      if (p.max_violation(a1, a2) > 0.0) continue;
      EXPECT_GE(p.objective(a1, a2), r.objective - 1e-9);
    }
  }
}
