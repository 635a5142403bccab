#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fpo/functionals.hpp"
#include "fpo/grid.hpp"
#include "fpo/levi_civita.hpp"

using namespace fpo;
constexpr double kPi = std::numbers::pi;

namespace {

ZLoop constant_loop(LoopGrid g, SymmetryClass cls, double c) {
  ZLoop z = ZLoop::zeros(g, cls);
  for (auto& x : z.v) x = c;
  return z;
}

ZLoop sin_loop(LoopGrid g, double amp) {
  ZLoop z = ZLoop::zeros(g, SymmetryClass::SymmetricAntiperiodic);
  for (int j = 0; j < g.n; ++j) z.v[j] = amp * std::sin(kPi * g.tau(j));
  return z;
}

// Critical pair of the decoupled family at r = 0: inner loop is the Kepler
// minimizer, outer loop the constant balancing its mean attraction.
ZPair decoupled_pair(LoopGrid g, double N = 2.0) {
  const double zeta = std::pow(2.0 * N / (kPi * kPi), 1.0 / 6.0);
  ZLoop z2 = sin_loop(g, zeta);
  const double q2bar = mean_q(z2);
  const double c = std::sqrt(q2bar * std::sqrt(N) / (std::sqrt(N) - 1.0));
  return {constant_loop(g, SymmetryClass::SymmetricPeriodic1, c), z2};
}

}  // namespace

TEST_CASE("functional values on constant pairs") {
  auto g = LoopGrid::make(256);
  ZPair p{constant_loop(g, SymmetryClass::SymmetricPeriodic1, 2.0),
          constant_loop(g, SymmetryClass::SymmetricPeriodic1, 1.0)};
  CHECK(eval_Q(p.z1, 2.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(eval_Q(p.z2, 2.0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(eval_A(p) == doctest::Approx(-1.0 / 3.0).epsilon(1e-14));
  CHECK(eval_I(p) == doctest::Approx(-1.0 / 3.0).epsilon(1e-13));
  CHECK(eval_B(p, {2.0, 1.0}) == doctest::Approx(13.0 / 6.0).epsilon(1e-13));
  CHECK(eval_B(p, {2.0, 0.0}) == doctest::Approx(13.0 / 6.0).epsilon(1e-13));

  SUBCASE("gradients on constants are the known constants") {
    auto ga = grad_A(p);
    auto gi = grad_I(p);
    for (double v : ga.first.v) CHECK(v == doctest::Approx(4.0 / 9.0).epsilon(1e-12));
    for (double v : ga.second.v) CHECK(v == doctest::Approx(-2.0 / 9.0).epsilon(1e-12));
    for (double v : gi.first.v) CHECK(v == doctest::Approx(4.0 / 9.0).epsilon(1e-11));
    for (double v : gi.second.v) CHECK(v == doctest::Approx(-2.0 / 9.0).epsilon(1e-11));
  }
}

TEST_CASE("Q of the sine loop and criticality of the Kepler minimizer") {
  auto g = LoopGrid::make(512);
  CHECK(eval_Q(sin_loop(g, 1.0), 2.0) == doctest::Approx(kPi * kPi / 2 + 4).epsilon(1e-13));
  const double zeta = std::cbrt(2.0 / kPi);
  const ZLoop gq = grad_Q(sin_loop(g, zeta), 2.0);
  CHECK(sup_norm(gq) <= 1e-9);
}

TEST_CASE("blend identity of B_r") {
  auto g = LoopGrid::make(256);
  std::mt19937_64 rng(3);
  ZPair p = decoupled_pair(g);
  p.z1 = p.z1 + random_loop(g, SymmetryClass::SymmetricPeriodic1, rng, 3, 0.03);
  p.z2 = p.z2 + random_loop(g, SymmetryClass::SymmetricAntiperiodic, rng, 3, 0.03);
  const double q = eval_Q(p.z1, 2.0) + eval_Q(p.z2, 2.0);
  const double a = eval_A(p);
  const double i = eval_I(p);
  for (double r : {0.0, 0.35, 1.0})
    CHECK(eval_B(p, {2.0, r}) == doctest::Approx(q + r * i + (1 - r) * a).epsilon(1e-13));
}

TEST_CASE("decoupled family: residual vanishes at its r=0 critical pair") {
  auto g = LoopGrid::make(512);
  ZPair p = decoupled_pair(g);
  const auto [f1, f2] = decoupled_F(p, 0.0);
  CHECK(sup_norm(f1) <= 1e-9);
  CHECK(sup_norm(f2) <= 1e-9);
  SUBCASE("first component does not depend on r") {
    const auto [g1, g2] = decoupled_F(p, 0.7);
    for (int j = 0; j < g.n; ++j) CHECK(g1.v[j] == f1.v[j]);
  }
}

TEST_CASE("Hamiltonian picture at the Legendre momenta") {
  auto g = LoopGrid::make(256);
  std::mt19937_64 rng(11);
  ZPair p = decoupled_pair(g);
  p.z1 = p.z1 + random_loop(g, SymmetryClass::SymmetricPeriodic1, rng, 3, 0.04);
  p.z2 = p.z2 + random_loop(g, SymmetryClass::SymmetricAntiperiodic, rng, 3, 0.04);
  const ModelParams m{2.0, 0.4};
  Momentum mom{legendre(p.z1), legendre(p.z2)};

  SUBCASE("action identity <eta, z'> - H = B") {
    const double pairing =
        inner(mom.eta1, derivative(p.z1)) + inner(mom.eta2, derivative(p.z2));
    CHECK(pairing - eval_H(p, mom, m) == doctest::Approx(eval_B(p, m)).epsilon(1e-12));
  }
  SUBCASE("first-order residuals reduce to the gradient") {
    const auto [res_z, res_eta] = hamilton_residual(p, mom, m);
    CHECK(sup_norm(res_z.first) <= 1e-12);
    CHECK(sup_norm(res_z.second) <= 1e-12);
    const auto gb = grad_B(p, m);
    CHECK(sup_norm(res_eta.first + gb.first) <= 1e-9);
    CHECK(sup_norm(res_eta.second + gb.second) <= 1e-9);
  }
}

TEST_CASE("admissibility flags") {
  auto g = LoopGrid::make(256);
  SUBCASE("ordered constants are admissible") {
    ZPair p{constant_loop(g, SymmetryClass::SymmetricPeriodic1, 2.0),
            constant_loop(g, SymmetryClass::SymmetricPeriodic1, 1.0)};
    const auto adm = check_admissible(p);
    CHECK(adm.z1_nonvanishing);
    CHECK(adm.ordered);
    CHECK(adm.mean_domain);
    CHECK(adm.ok());
  }
  SUBCASE("swapped constants fail ordering and the mean-field domain") {
    ZPair p{constant_loop(g, SymmetryClass::SymmetricPeriodic1, 1.0),
            constant_loop(g, SymmetryClass::SymmetricPeriodic1, 2.0)};
    const auto adm = check_admissible(p);
    CHECK(adm.z1_nonvanishing);
    CHECK_FALSE(adm.ordered);
    CHECK_FALSE(adm.mean_domain);
    CHECK_FALSE(adm.ok());
  }
}

TEST_CASE("domain errors carry their exact messages") {
  auto g = LoopGrid::make(256);
  const ZLoop c2 = constant_loop(g, SymmetryClass::SymmetricPeriodic1, 2.0);
  const ZLoop c1 = constant_loop(g, SymmetryClass::SymmetricPeriodic1, 1.0);

  SUBCASE("mismatched grids") {
    ZLoop other = constant_loop(LoopGrid::make(128), SymmetryClass::SymmetricPeriodic1, 1.0);
    CHECK_THROWS_WITH_AS(eval_A({c2, other}), "incompatible grids", std::invalid_argument);
  }
  SUBCASE("mean-field term outside its domain") {
    CHECK_THROWS_WITH_AS(eval_A({c1, c2}), "outside ℋ_av", std::runtime_error);
  }
  SUBCASE("instantaneous term: outer loop must not vanish or change sign") {
    ZLoop z1 = ZLoop::zeros(g, SymmetryClass::SymmetricPeriodic1);
    for (int j = 0; j < g.n; ++j) z1.v[j] = 0.1 + std::cos(2 * kPi * g.tau(j));
    CHECK_THROWS_WITH_AS(eval_I({z1, c1}), "outside ℋ_in", std::runtime_error);
  }
  SUBCASE("instantaneous term: ordering violation") {
    const ZLoop small = constant_loop(g, SymmetryClass::SymmetricPeriodic1, 0.5);
    CHECK_THROWS_WITH_AS(eval_I({small, sin_loop(g, 0.8)}), "outside ℋ_in",
                         std::runtime_error);
  }
  SUBCASE("instantaneous term: non-transverse inner zero") {
    ZLoop z2 = ZLoop::zeros(g, SymmetryClass::SymmetricAntiperiodic);
    for (int j = 0; j < g.n; ++j) {
      const double s = std::sin(kPi * g.tau(j));
      z2.v[j] = 0.8 * s * s * s;
    }
    CHECK_THROWS_WITH_AS(grad_I({c2, z2}), "singular integrand", std::runtime_error);
  }
}
