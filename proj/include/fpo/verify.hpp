#pragma once
// Independent checks on computed orbits: second-order ODE residuals in
// physical time, energy bookkeeping, scaling covariance, symmetry, and
// finite-difference gradient verification.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fpo/functionals.hpp"

namespace fpo {

enum class Family {
  Interp,     // coupled system: qddot_1 = -2N/q1^2 + r/(q1-q2)^2 + (1-r)/(qbar1-qbar2)^2 ...
  Decoupled,  // stage-A system: each electron against averaged fields
};

// Physical-time view of a pair, built through the Levi-Civita chart. Keeps the
// generating loops so second derivatives can be evaluated in the regular frame,
// plus period/scale so rescaled copies stay exact on the same index grid.
struct QOrbit {
  LoopGrid grid;
  Family family = Family::Interp;
  double r = 0.0;
  double N = 2.0;
  double period = 1.0;  // physical period T (t-grid covers [0, 2T))
  double scale = 1.0;   // c with q(t) = c^2 q_base(t / c^3)
  std::vector<double> q1, q2;    // samples on t_i = i * (2T/n)
  std::vector<double> E1, E2;    // individual Kepler energies along the orbit
  std::vector<double> zeros2;    // collision times of q2 in [0, 2T)
  ZPair z;                       // generating pair (unscaled)
};

QOrbit make_orbit(const ZPair& p, double r, Family family, double N = 2.0);
QOrbit rescale_orbit(const QOrbit& q, double c);

// Masked sup of |q_i * (qddot_i - rhs_i)| over grid points farther than 5h
// from any collision of q2; qddot through the regular frame, qbar terms by the
// exact norm identities.
double ode_residual(const QOrbit& orbit);

struct EnergyReport {
  double conserved_variation = 0.0;  // sup |Etilde - mean(Etilde)| over the mask
  double e2_jump = 0.0;              // one-sided extrapolation mismatch across collisions
  double total_energy = 0.0;         // mean of the conserved combination
  bool negative = false;
};
EnergyReport energy_checks(const QOrbit& orbit);

struct RescaleReport {
  double residual = 0.0;      // ode_residual of the rescaled orbit
  double energy_rel_error = 0.0;  // |E_c - c^-2 E| / |E|
  double period_ratio = 0.0;  // T_c / T (should equal c^3 exactly)
};
RescaleReport rescale_check(const QOrbit& orbit, double c);

struct SymmetryReport {
  double dz1_at_0 = 0.0;      // |z1'(0)|
  double z2_at_0 = 0.0;       // |z2(0)|
  double dz1_at_half = 0.0;   // |z1'(1/2)|
  double dz2_at_half = 0.0;   // |z2'(1/2)|
  double q_reflection = 0.0;  // sup_i |q_i(t) - q_i(1 - t)| in physical time
  double max() const;
};
SymmetryReport symmetry_check(const ZPair& p);

struct CorrespondenceReport {
  bool z1_zero_free = false;
  int z2_zero_count = 0;         // transverse zeros per period, expected 1
  double branch_grad_sup = 0.0;  // max gradient sup-norm over the 4 sign branches
  std::string error;             // "wrong topological class" when classes are off
};
CorrespondenceReport correspondence_check(const ZPair& p, const ModelParams& m);

// Sup-norm of (eta residual + grad B) at eta = legendre(z): Hamiltonian and
// variational pictures must produce the same first-order condition.
double legendre_check(const ZPair& p, const ModelParams& m);

enum class FunctionalId { Q, A, I, B };

// Central-difference directional derivatives against analytic gradients over
// n_dirs random band-limited in-class directions; returns max relative error.
double gradcheck(FunctionalId id, const ZPair& p, const ModelParams& m, int n_dirs,
                 std::uint64_t seed);

}  // namespace fpo
