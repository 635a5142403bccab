#pragma once
// Levi-Civita chart between parameter loops z(tau) on [0,2) and physical
// trajectories q(t) = z(tau(t))^2 on the unit-period time grid. The time
// change solves dt/dtau = z^2/||z||^2, so collisions (zeros of z) become
// regular points of z and the chart is exact on trigonometric interpolants.

#include <optional>
#include <vector>

#include "fpo/grid.hpp"
#include "fpo/spectral.hpp"

namespace fpo {

// Time change of one loop: t(tau) = int_0^tau z^2 / ||z||^2, plus its inverse.
// t(tau+2) = t(tau) + 2; for 1-periodic/antiperiodic loops also t(tau+1) = t(tau)+1.
class TimeChange {
 public:
  explicit TimeChange(const ZLoop& z);

  double norm2() const { return nrm2_; }
  double t_of_tau(double tau) const;     // closed-form antiderivative evaluation
  double tau_of_t(double t) const;       // monotone inversion (bisection+Newton)
  // Batch inversion of an increasing sequence of times: marches with the
  // previous result as predictor (Newton), falling back to the bracketed
  // scalar inversion wherever the march is not clearly converged.
  std::vector<double> tau_of_t_array(const std::vector<double>& ts) const;
  const std::vector<double>& t_grid() const { return t_of_tau_grid_; }

  double z_at(double tau) const { return z_series_.eval(tau); }
  double dz_at(double tau) const { return dz_series_.eval(tau); }

 private:
  double nrm2_ = 0.0;
  TrigSeries z_series_, dz_series_, zsq_series_;
  std::vector<double> t_of_tau_grid_;  // t at tau_j, strictly increasing
  int n_ = 0;
};

// Samples of q(t_i) = z(tau(t_i))^2 on the uniform t-grid t_i = i*h (h = 2/n,
// two periods of a 1-periodic trajectory). Throws "degenerate loop" if z == 0.
std::vector<double> z_to_q(const ZLoop& z);

// Samples of zb(tau_b(t_a(tau_j))): partner loop expressed in the frame of za.
std::vector<double> cross_eval(const ZLoop& za, const ZLoop& zb);

// Mean of q over one period, via the exact norm identity ||z^2||^2/||z||^2.
double mean_q(const ZLoop& z);
// Mean of 1/q over one period = 1/||z||^2 (finite even across collisions).
double mean_inv_q(const ZLoop& z);
// Integral of qdot^2 over one period = 4 ||z||^2 ||z'||^2.
double qdot_norm2(const ZLoop& z);

// Kepler energy E(tau) = (2 ||z||^4 z'^2 - N) / z^2 along the loop. At a
// transverse zero the removable singularity is filled with the limit
// 2||z||^4 (z''^2 + z' z''') / z'^2. Throws "collision not regularizable" /
// "non-transverse collision" per the conditions below.
std::vector<double> kepler_energy(const ZLoop& z, double N);

// Reconstruct a loop from q-samples. The class fixes the zero-count parity
// (odd counts per period need an antiperiodic-type class) and `sign` picks the
// branch of z right after tau = 0. Collision times (q -> 0 like t^(2/3)) are
// located by a cusp-model fit and integrated under u = (t - t*)^(1/3); the
// result is then polished by ridge-regularized Gauss-Newton on the forward map
// until z_to_q(result) matches q to solver precision. Between-sample structure
// at the collisions (which the t-samples cannot see) is resolved toward the
// smoothest representative.
ZLoop q_to_z(const std::vector<double>& q, LoopGrid g, SymmetryClass cls, double sign = 1.0);

}  // namespace fpo
