#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "fpo/grid.hpp"
#include "fpo/levi_civita.hpp"

using namespace fpo;
constexpr double kPi = std::numbers::pi;

namespace {

ZLoop sin_loop(LoopGrid g, double amp) {
  ZLoop z = ZLoop::zeros(g, SymmetryClass::SymmetricAntiperiodic);
  for (int j = 0; j < g.n; ++j) z.v[j] = amp * std::sin(kPi * g.tau(j));
  return z;
}

}  // namespace

TEST_CASE("time change of sin: closed forms") {
  auto g = LoopGrid::make(512);
  auto z = sin_loop(g, 1.0);
  TimeChange tc(z);
  // t(tau) = tau - sin(2 pi tau) / (2 pi) for z = sin(pi tau).
  CHECK(tc.norm2() == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(tc.t_of_tau(0.25) == doctest::Approx(0.25 - 0.5 / kPi).epsilon(1e-14));
  CHECK(tc.t_of_tau(0.5) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(tc.t_of_tau(2.0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(tc.t_of_tau(-0.25) == doctest::Approx(-(0.25 - 0.5 / kPi)).epsilon(1e-13));
  CHECK(tc.tau_of_t(0.25 - 0.5 / kPi) == doctest::Approx(0.25).epsilon(1e-13));
  CHECK(tc.tau_of_t(0.0) == 0.0);
  CHECK(tc.tau_of_t(2.0) == 2.0);
}

TEST_CASE("time change inversion: precision contract") {
  // tau is recovered to machine precision where dt/dtau is healthy; at
  // collisions t is cubically flat, so only forward consistency survives
  // (the tau error there is bounded by cube-root conditioning, ~2e-6).
  auto g = LoopGrid::make(512);
  auto z = sin_loop(g, 1.0);
  TimeChange tc(z);
  double worst_healthy = 0, worst_fwd = 0, worst_all = 0;
  for (int j = 0; j < g.n; ++j) {
    const double t = tc.t_of_tau(g.tau(j));
    const double th = tc.tau_of_t(t);
    worst_all = std::max(worst_all, std::abs(th - g.tau(j)));
    worst_fwd = std::max(worst_fwd, std::abs(tc.t_of_tau(th) - t));
    if (std::abs(z.v[j]) > 0.1) worst_healthy = std::max(worst_healthy, std::abs(th - g.tau(j)));
  }
  CHECK(worst_healthy <= 1e-12);
  CHECK(worst_fwd <= 1e-13);
  CHECK(worst_all <= 5e-6);

  const auto taus = tc.tau_of_t_array(tc.t_grid());
  double worst_batch = 0;
  for (int j = 0; j < g.n; ++j)
    if (std::abs(z.v[j]) > 0.1) worst_batch = std::max(worst_batch, std::abs(taus[j] - g.tau(j)));
  CHECK(worst_batch <= 1e-12);
}

TEST_CASE("norm identities for sin") {
  auto g = LoopGrid::make(256);
  auto z = sin_loop(g, 1.0);
  CHECK(mean_q(z) == doctest::Approx(0.75).epsilon(1e-13));
  CHECK(mean_inv_q(z) == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(qdot_norm2(z) == doctest::Approx(kPi * kPi).epsilon(1e-12));
}

TEST_CASE("norm identities agree with direct time-domain quadrature") {
  auto g = LoopGrid::make(512);
  SUBCASE("cusped loop: trapezoid average of q is O(h^(5/3)) accurate") {
    std::mt19937_64 rng(7);
    ZLoop z = sin_loop(g, 0.9) + random_loop(g, SymmetryClass::SymmetricAntiperiodic, rng, 3, 0.05);
    const auto q = z_to_q(z);
    double mq = 0;
    for (double v : q) mq += v;
    mq /= q.size();
    CHECK(mean_q(z) == doctest::Approx(mq).epsilon(2e-4));
  }
  SUBCASE("zero-free loop: q and 1/q averages are spectrally exact in t") {
    ZLoop z = ZLoop::zeros(g, SymmetryClass::SymmetricPeriodic1);
    for (int j = 0; j < g.n; ++j) z.v[j] = 1.5 + 0.3 * std::cos(2 * kPi * g.tau(j));
    const auto q = z_to_q(z);
    double mq = 0, miq = 0;
    for (double v : q) {
      mq += v;
      miq += 1.0 / v;
    }
    mq /= q.size();
    miq /= q.size();
    CHECK(mean_q(z) == doctest::Approx(mq).epsilon(1e-11));
    CHECK(mean_inv_q(z) == doctest::Approx(miq).epsilon(1e-11));
  }
}

TEST_CASE("kepler energy of the minimizing loop is the known constant") {
  auto g = LoopGrid::make(512);
  const double zeta = std::cbrt(2.0 / kPi);
  auto z = sin_loop(g, zeta);
  const auto E = kepler_energy(z, 2.0);
  const double want = -std::cbrt(2.0 * kPi * kPi);
  for (double e : E) CHECK(e == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("kepler energy rejects a non-transverse zero") {
  auto g = LoopGrid::make(256);
  ZLoop z = ZLoop::zeros(g, SymmetryClass::Periodic1);
  for (int j = 0; j < g.n; ++j) {
    const double s = std::sin(kPi * g.tau(j));
    z.v[j] = s * s;  // double zero at tau = 0, 1
  }
  CHECK_THROWS_WITH_AS(kepler_energy(z, 2.0), "non-transverse collision", std::runtime_error);
}

TEST_CASE("z_to_q basics") {
  auto g = LoopGrid::make(256);
  SUBCASE("constant loop maps to constant profile") {
    ZLoop z = ZLoop::zeros(g, SymmetryClass::SymmetricPeriodic1);
    for (auto& x : z.v) x = 1.3;
    const auto q = z_to_q(z);
    for (double v : q) CHECK(v == doctest::Approx(1.3 * 1.3).epsilon(1e-14));
  }
  SUBCASE("collision node is exact and profile nonnegative") {
    auto z = sin_loop(g, 0.8);
    const auto q = z_to_q(z);
    CHECK(q[0] == 0.0);
    for (double v : q) CHECK(v >= 0.0);
    // q is 1-periodic in t for an antiperiodic-type loop. Nodes hitting the
    // interior collision carry the squared cube-root inversion noise, so the
    // comparison is absolute rather than relative.
    for (int i = 0; i < g.n / 2; ++i)
      CHECK(std::abs(q[i] - q[i + g.n / 2]) <= 1e-9);
  }
}

TEST_CASE("cross_eval: self-evaluation is the identity, grids must match") {
  auto g = LoopGrid::make(256);
  ZLoop z = ZLoop::zeros(g, SymmetryClass::SymmetricPeriodic1);
  for (int j = 0; j < g.n; ++j) z.v[j] = 1.5 + 0.2 * std::cos(2 * kPi * g.tau(j));
  const auto w = cross_eval(z, z);
  for (int j = 0; j < g.n; ++j) CHECK(w[j] == doctest::Approx(z.v[j]).epsilon(1e-12));

  ZLoop z2 = ZLoop::zeros(LoopGrid::make(128), SymmetryClass::SymmetricPeriodic1);
  for (auto& x : z2.v) x = 1.0;
  CHECK_THROWS_WITH_AS(cross_eval(z, z2), "incompatible grids", std::invalid_argument);
}

TEST_CASE("degenerate loops are rejected") {
  auto g = LoopGrid::make(256);
  ZLoop zero = ZLoop::zeros(g, SymmetryClass::Plain);
  CHECK_THROWS_WITH_AS(TimeChange{zero}, "degenerate loop", std::runtime_error);
  ZLoop flat = ZLoop::zeros(g, SymmetryClass::Plain);
  for (int j = 0; j < g.n; ++j) flat.v[j] = std::sin(kPi * g.tau(j));
  flat.v[0] = flat.v[1] = flat.v[2] = 0.0;  // a run of zero samples
  CHECK_THROWS_WITH_AS(TimeChange{flat}, "degenerate loop", std::runtime_error);
}

TEST_CASE("q_to_z reconstructs constants exactly") {
  auto g = LoopGrid::make(256);
  std::vector<double> q(g.n, 2.89);
  const ZLoop z = q_to_z(q, g, SymmetryClass::SymmetricPeriodic1);
  for (double v : z.v) CHECK(v == doctest::Approx(1.7).epsilon(1e-12));
}

TEST_CASE("q_to_z round-trips with z_to_q through collisions") {
  auto g = LoopGrid::make(512);
  std::mt19937_64 rng(12345);
  const double zeta = std::cbrt(2.0 / kPi);
  ZLoop zt = sin_loop(g, zeta) + random_loop(g, SymmetryClass::SymmetricAntiperiodic, rng, 4, 0.03);
  const auto q = z_to_q(zt);
  const ZLoop back = q_to_z(q, g, SymmetryClass::SymmetricAntiperiodic);
  const auto qb = z_to_q(back);
  double worst = 0;
  for (int i = 0; i < g.n; ++i) worst = std::max(worst, std::abs(qb[i] - q[i]));
  CHECK(worst <= 1e-6);
  // The loop itself is pinned by the samples up to the between-sample
  // indeterminacy at the cusps; away from machine noise this stays small.
  double wz = 0;
  for (int i = 0; i < g.n; ++i) wz = std::max(wz, std::abs(back.v[i] - zt.v[i]));
  CHECK(wz <= 2e-3);
}

TEST_CASE("q_to_z sign branches are exact negatives") {
  auto g = LoopGrid::make(512);
  auto z = sin_loop(g, 0.8);
  const auto q = z_to_q(z);
  const ZLoop zp = q_to_z(q, g, SymmetryClass::SymmetricAntiperiodic, +1.0);
  const ZLoop zm = q_to_z(q, g, SymmetryClass::SymmetricAntiperiodic, -1.0);
  for (int j = 0; j < g.n; ++j) CHECK(zm.v[j] == -zp.v[j]);
  CHECK(zp.v[1] > 0.0);
}

TEST_CASE("q_to_z error conditions") {
  auto g = LoopGrid::make(512);
  SUBCASE("parity mismatch: odd collision count vs periodic class") {
    const auto q = z_to_q(sin_loop(g, 0.8));  // one collision per period
    CHECK_THROWS_WITH_AS(q_to_z(q, g, SymmetryClass::SymmetricPeriodic1), "parity mismatch",
                         std::runtime_error);
  }
  SUBCASE("quartic zero is not regularizable") {
    std::vector<double> q(g.n);
    for (int i = 0; i < g.n; ++i) {
      const double s = std::sin(kPi * g.tau(i));
      q[i] = s * s * s * s;  // 1/q not integrable
    }
    CHECK_THROWS_WITH_AS(q_to_z(q, g, SymmetryClass::SymmetricPeriodic1),
                         "collision not regularizable", std::runtime_error);
  }
  SUBCASE("identically zero profile is degenerate") {
    std::vector<double> q(g.n, 0.0);
    CHECK_THROWS_WITH_AS(q_to_z(q, g, SymmetryClass::Plain), "degenerate loop",
                         std::runtime_error);
  }
}
