// Physical-time checks: ODE residuals, energy bookkeeping, scaling
// covariance, symmetry, topological class, Hamiltonian consistency, and the
// FD gradient verifier.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "fpo/functionals.hpp"
#include "fpo/grid.hpp"
#include "fpo/levi_civita.hpp"
#include "fpo/solvers.hpp"
#include "fpo/verify.hpp"

using namespace fpo;

namespace {

constexpr double kPi = std::numbers::pi;

ZLoop constant_loop(LoopGrid g, double value, SymmetryClass cls) {
  ZLoop z = ZLoop::zeros(g, cls);
  std::fill(z.v.begin(), z.v.end(), value);
  return z;
}

// Stage-A endpoint: critical point of the mean-field action, reached by
// continuation from the analytic seed.
ZPair mean_field_orbit(LoopGrid g) {
  SolveOptions opt;
  const ContinuationTrace tr = continue_homotopy(g, 4, 0, opt);
  REQUIRE(tr.completed);
  return tr.z;
}

ZPair blended_orbit(LoopGrid g) {  // full continuation to the instantaneous model
  SolveOptions opt;
  const ContinuationTrace tr = continue_homotopy(g, 4, 6, opt);
  REQUIRE(tr.completed);
  return tr.z;
}

}  // namespace

TEST_CASE("seed orbit: profiles, energies, collisions, and residual") {
  const LoopGrid g = LoopGrid::make(512);
  const ZPair seed = decoupled_seed(g, 2.0);
  const QOrbit orbit = make_orbit(seed, 0.0, Family::Decoupled);

  const double zbar2 = seed.z1.v[0] * seed.z1.v[0];
  for (int j = 0; j < g.n; ++j) CHECK(std::abs(orbit.q1[j] - zbar2) <= 1e-10);
  CHECK(orbit.q2[0] == 0.0);

  REQUIRE(orbit.zeros2.size() == 2);
  CHECK(std::abs(orbit.zeros2[0] - 0.0) <= 1e-12);
  CHECK(std::abs(orbit.zeros2[1] - 1.0) <= 1e-12);

  // Inner energy is the collision-orbit constant, including at the collision
  // nodes themselves where the removable-limit formula takes over.
  const double e2 = -std::pow(2.0 * kPi * kPi, 1.0 / 3.0);
  for (int j = 0; j < g.n; ++j) CHECK(orbit.E2[j] == doctest::Approx(e2).epsilon(1e-6));
  const double e1 = -2.0 / zbar2;
  for (int j = 0; j < g.n; ++j) CHECK(orbit.E1[j] == doctest::Approx(e1).epsilon(1e-12));

  CHECK(ode_residual(orbit) <= 1e-6);

  const EnergyReport en = energy_checks(orbit);
  CHECK(en.conserved_variation <= 1e-6);
  CHECK(en.negative);
  // Closed form of the conserved combination at the seed: the mean-field term
  // equals N/zbar^2 there, so the total is E2 - 2N/zbar^2.
  CHECK(en.total_energy == doctest::Approx(e2 - 4.0 / zbar2).epsilon(1e-9));
  CHECK(en.e2_jump <= 1e-6);
}

TEST_CASE("a small bump in the inner loop is visible in the residual") {
  const LoopGrid g = LoopGrid::make(512);
  ZPair bumped = decoupled_seed(g, 2.0);
  for (int j = 0; j < g.n; ++j) {
    bumped.z2.v[j] += 1e-3 * std::sin(3.0 * kPi * g.tau(j));
  }
  const QOrbit orbit = make_orbit(bumped, 0.0, Family::Decoupled);
  CHECK(ode_residual(orbit) > 1e-3);
}

TEST_CASE("mean-field critical point solves its physical system") {
  const LoopGrid g = LoopGrid::make(256);
  const ZPair zp = mean_field_orbit(g);
  const QOrbit orbit = make_orbit(zp, 0.0, Family::Interp);

  CHECK(ode_residual(orbit) <= 1e-5);

  const EnergyReport en = energy_checks(orbit);
  CHECK(en.conserved_variation <= 1e-6);
  CHECK(en.negative);

  // The bare energy sum is NOT conserved in the averaged model: only the
  // combination with the mean-gap term is. Confirm the distinction is real.
  const std::vector<double> q1 = orbit.q1;
  double bare_lo = 1e300, bare_hi = -1e300;
  for (int j = 5; j < g.n / 2 - 5; ++j) {  // stay away from the collisions
    const double bare = orbit.E1[j] + orbit.E2[j];
    bare_lo = std::min(bare_lo, bare);
    bare_hi = std::max(bare_hi, bare);
  }
  CHECK(bare_hi - bare_lo > 1e-3);

  // Invariant box for the averaged family: inner mean radius in [1/2, 2],
  // outer radius constant and locked to (2 + sqrt 2) times the inner mean.
  const double qbar2 = mean_q(zp.z2);
  double q2max = 0.0;
  for (double v : orbit.q2) q2max = std::max(q2max, v);
  CHECK(qbar2 >= 0.5);
  CHECK(qbar2 <= q2max);
  CHECK(q2max <= 2.0);
  double q1lo = 1e300, q1hi = -1e300;
  for (double v : q1) {
    q1lo = std::min(q1lo, v);
    q1hi = std::max(q1hi, v);
  }
  CHECK(q1hi - q1lo <= 1e-6);
  CHECK(mean_q(zp.z1) == doctest::Approx((2.0 + std::sqrt(2.0)) * qbar2).epsilon(1e-6));
}

TEST_CASE("fully blended critical point solves the coupled system") {
  const LoopGrid g = LoopGrid::make(256);
  const ZPair zp = blended_orbit(g);
  const QOrbit orbit = make_orbit(zp, 1.0, Family::Interp);

  CHECK(ode_residual(orbit) <= 1e-5);
  const EnergyReport en = energy_checks(orbit);
  CHECK(en.conserved_variation <= 1e-6);
  CHECK(en.negative);
  CHECK(en.e2_jump <= 1e-6);

  const SymmetryReport sym = symmetry_check(zp);
  CHECK(sym.max() <= 1e-7);

  const ModelParams m{2.0, 1.0};
  const CorrespondenceReport co = correspondence_check(zp, m);
  CHECK(co.z1_zero_free);
  CHECK(co.z2_zero_count == 1);
  CHECK(co.error.empty());
  CHECK(co.branch_grad_sup <= 1e-7);

  CHECK(legendre_check(zp, m) <= 1e-7);
}

TEST_CASE("rescaling: exact on samples, covariant in the checks") {
  const LoopGrid g = LoopGrid::make(512);
  const QOrbit orbit = make_orbit(decoupled_seed(g, 2.0), 0.0, Family::Decoupled);

  SUBCASE("sample arrays scale exactly") {
    const QOrbit s = rescale_orbit(orbit, 2.0);
    CHECK(s.period == 8.0);
    CHECK(s.scale == 2.0);
    for (int j = 0; j < g.n; ++j) {
      CHECK(s.q1[j] == 4.0 * orbit.q1[j]);
      CHECK(s.q2[j] == 4.0 * orbit.q2[j]);
      CHECK(s.E1[j] == orbit.E1[j] / 4.0);
      CHECK(s.E2[j] == orbit.E2[j] / 4.0);
    }
    REQUIRE(s.zeros2.size() == 2);
    CHECK(s.zeros2[1] == 8.0 * orbit.zeros2[1]);
  }

  SUBCASE("doubling the size keeps the equations satisfied") {
    const RescaleReport rep = rescale_check(orbit, 2.0);
    CHECK(rep.residual <= 1e-5);
    CHECK(rep.energy_rel_error <= 1e-6);
    CHECK(rep.period_ratio == 8.0);
  }

  SUBCASE("non-dyadic factors work the same way") {
    const RescaleReport rep = rescale_check(orbit, 1.5);
    CHECK(rep.residual <= 1e-5);
    CHECK(rep.energy_rel_error <= 1e-6);
    CHECK(rep.period_ratio == doctest::Approx(3.375).epsilon(1e-15));
  }
}

TEST_CASE("symmetry check: clean on the seed, loud on an asymmetric loop") {
  const LoopGrid g = LoopGrid::make(256);
  const ZPair seed = decoupled_seed(g, 2.0);
  CHECK(symmetry_check(seed).max() <= 1e-10);

  ZPair skew;
  skew.z1 = constant_loop(g, 2.0, SymmetryClass::Plain);
  skew.z2 = ZLoop::zeros(g, SymmetryClass::Plain);
  for (int j = 0; j < g.n; ++j) {
    skew.z2.v[j] = std::sin(kPi * g.tau(j)) + 0.1 * std::sin(2.0 * kPi * g.tau(j));
  }
  const SymmetryReport rep = symmetry_check(skew);
  CHECK(rep.dz2_at_half == doctest::Approx(0.2 * kPi).epsilon(1e-10));
  CHECK(rep.q_reflection > 0.01);
}

TEST_CASE("topological class: one transverse collision, four critical branches") {
  const LoopGrid g = LoopGrid::make(256);
  const ZPair seed = decoupled_seed(g, 2.0);
  const ModelParams m{2.0, 0.0};

  const CorrespondenceReport ok = correspondence_check(seed, m);
  CHECK(ok.z1_zero_free);
  CHECK(ok.z2_zero_count == 1);
  CHECK(ok.error.empty());
  CHECK(ok.branch_grad_sup <= 1e-7);

  SUBCASE("an inner loop without zeros is flagged") {
    ZPair off;
    off.z1 = constant_loop(g, 2.0, SymmetryClass::SymmetricPeriodic1);
    off.z2 = ZLoop::zeros(g, SymmetryClass::SymmetricPeriodic1);
    for (int j = 0; j < g.n; ++j) off.z2.v[j] = 0.6 + 0.1 * std::cos(2.0 * kPi * g.tau(j));
    const CorrespondenceReport rep = correspondence_check(off, m);
    CHECK(rep.z1_zero_free);
    CHECK(rep.z2_zero_count == 0);
    CHECK(rep.error == "wrong topological class");
  }

  SUBCASE("two collisions per period are also the wrong class") {
    ZPair off;
    off.z1 = constant_loop(g, 2.0, SymmetryClass::Plain);
    off.z2 = ZLoop::zeros(g, SymmetryClass::Plain);
    for (int j = 0; j < g.n; ++j) off.z2.v[j] = 0.8 * std::sin(2.0 * kPi * g.tau(j));
    const CorrespondenceReport rep = correspondence_check(off, m);
    CHECK(rep.z2_zero_count == 2);
    CHECK(rep.error == "wrong topological class");
  }
}

TEST_CASE("hamiltonian and variational pictures agree at critical points") {
  const LoopGrid g = LoopGrid::make(256);
  const ZPair seed = decoupled_seed(g, 2.0);
  CHECK(legendre_check(seed, ModelParams{2.0, 0.0}) <= 1e-8);

  // A generic admissible pair is far from critical: the first-order residual
  // must say so.
  ZPair off = seed;
  for (int j = 0; j < g.n; ++j) {
    off.z1.v[j] += 0.1 * std::cos(2.0 * kPi * g.tau(j));
    off.z2.v[j] += 0.05 * std::sin(3.0 * kPi * g.tau(j));
  }
  CHECK(legendre_check(off, ModelParams{2.0, 0.0}) > 1e-2);
}

TEST_CASE("finite differences confirm every analytic gradient") {
  const LoopGrid g = LoopGrid::make(256);
  ZPair p = decoupled_seed(g, 2.0);
  for (int j = 0; j < g.n; ++j) {
    p.z1.v[j] += 0.08 * std::cos(2.0 * kPi * g.tau(j));
    p.z2.v[j] += 0.05 * std::sin(3.0 * kPi * g.tau(j));
  }
  REQUIRE(check_admissible(p).ok());

  CHECK(gradcheck(FunctionalId::Q, p, ModelParams{2.0, 0.0}, 4, 11) <= 1e-5);
  CHECK(gradcheck(FunctionalId::A, p, ModelParams{2.0, 0.0}, 4, 12) <= 1e-5);
  CHECK(gradcheck(FunctionalId::I, p, ModelParams{2.0, 0.0}, 4, 13) <= 1e-5);
  CHECK(gradcheck(FunctionalId::B, p, ModelParams{2.0, 0.5}, 4, 14) <= 1e-5);
}

TEST_CASE("mismatched grids are rejected") {
  const ZPair bad{kepler_seed(LoopGrid::make(128), 2.0), kepler_seed(LoopGrid::make(256), 2.0)};
  CHECK_THROWS_WITH_AS(make_orbit(bad, 0.0, Family::Interp), "incompatible grids",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(symmetry_check(bad), "incompatible grids", std::invalid_argument);
}
