#include "fpo/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "fpo/levi_civita.hpp"
#include "fpo/spectral.hpp"

namespace fpo {
namespace {

// Collisions of one electron are not smooth events for its partner: through
// the time composition they print a one-periodic |tau - tau_c|^(8/3) kink
// (tau_c = 0, 1, equal amplitudes because the zero-free profile is
// one-periodic) onto the partner loop, so its coefficients decay only like
// k^(-11/3) and plain spectral differentiation stalls near the kinks. The
// template |sin(pi tau)|^(8/3) carries the same kinks; subtracting a fitted
// multiple leaves a remainder with a k^(-13/3) tail that differentiates
// cleanly, and the template's own derivatives are closed-form.
double cusp_T(double tau) {
  const double s = std::sin(M_PI * tau);
  return std::pow(s * s, 4.0 / 3.0);
}

double cusp_dT(double tau) {
  const double s = std::sin(M_PI * tau);
  const double u = s * s;
  if (u == 0.0) return 0.0;
  return (4.0 * M_PI / 3.0) * std::cbrt(u) * std::sin(2.0 * M_PI * tau);
}

double cusp_ddT(double tau) {
  const double s = std::sin(M_PI * tau);
  const double u = s * s;
  if (u == 0.0) return 0.0;  // the limit at the kink is zero
  const double s2 = std::sin(2.0 * M_PI * tau);
  const double c2 = std::cos(2.0 * M_PI * tau);
  const double u13 = std::cbrt(u);
  return (4.0 * M_PI * M_PI / 3.0) * (s2 * s2 / (3.0 * u13 * u13) + 2.0 * c2 * u13);
}

// Spectral view of one loop plus its time change: everything the physical-time
// checks need to evaluate q, qdot, qddot, and the energies away from the
// parameter grid without ever differentiating a cusped function. The stored
// series describe the smooth remainder after the cusp-template split; beta is
// zero for band-limited loops, which makes the split the identity.
struct Frame {
  TrigSeries z, dz, d2z, d3z;
  double beta = 0.0;  // fitted cusp-template amplitude
  double n2 = 0.0;    // ||z||^2
  double amp = 0.0;   // sup |z|
  std::vector<double> tau_at_t;  // tau(t_i) on the uniform base-time grid

  double z_at(double tau) const { return z.eval(tau) + beta * cusp_T(tau); }
  double dz_at(double tau) const { return dz.eval(tau) + beta * cusp_dT(tau); }
  double ddz_at(double tau) const { return d2z.eval(tau) + beta * cusp_ddT(tau); }
};

Frame make_frame(const ZLoop& zl) {
  Frame f;
  f.n2 = norm2(zl);
  f.amp = sup_norm(zl);

  // Fit the template amplitude by least squares over a coefficient window
  // chosen so the kink tail dominates both neighbours: above it, the top
  // modes are inflated by the grid's response to the truncated tail; below
  // it, the smooth part's exponentially decaying coefficients still compete.
  // Loops with nothing in the window (smooth profiles, random test
  // directions) keep beta = 0 through the energy guard.
  const int n = zl.n();
  const int K = n / 2;
  const TrigSeries full = TrigSeries::fit(zl.v);
  bool zero_free = true;
  for (int j = 0; j < n; ++j) {
    if (zl.v[j] * zl.v[(j + 1) % n] <= 0.0) zero_free = false;
  }
  double band = 0.0, num = 0.0, den = 0.0;
  if (zero_free) {
    std::vector<double> tmpl(n);
    for (int j = 0; j < n; ++j) tmpl[j] = cusp_T(zl.grid.tau(j));
    const TrigSeries tf = TrigSeries::fit(tmpl);
    for (int k = K / 4; k < 3 * K / 8; ++k) {
      const double az = full.cos_coeffs()[k];
      const double bz = full.sin_coeffs()[k];
      const double at = tf.cos_coeffs()[k];
      band += az * az + bz * bz;
      num += az * at;
      den += at * at;
    }
  }
  if (std::sqrt(band) > 1e-12 * std::max(f.amp, 1.0) && den > 0.0) f.beta = num / den;

  std::vector<double> smooth = zl.v;
  if (f.beta != 0.0) {
    for (int j = 0; j < n; ++j) smooth[j] -= f.beta * cusp_T(zl.grid.tau(j));
  }
  // Roll off everything above the fit window. After the kink template is
  // removed, the genuine remainder up there decays fast, so those modes hold
  // almost nothing but the grid's own response to the truncated tail --
  // amplitudes ~1e-10 in z, yet (pi k)^2-amplified into the leading error of
  // every second derivative. The rolled-off frame still matches the raw
  // samples to ~1e-9 sup.
  f.z = TrigSeries::fit(smooth).lowpass(0.375);
  f.dz = f.z.derivative();
  f.d2z = f.z.second_derivative();
  f.d3z = f.d2z.derivative();

  const TimeChange tc(zl);
  std::vector<double> ts(n);
  for (int j = 0; j < n; ++j) ts[j] = zl.grid.tau(j);
  f.tau_at_t = tc.tau_of_t_array(ts);
  return f;
}

// Kepler energy E = qdot^2/2 - N/q through the regular frame. Near a zero of
// z the subtractive form loses all digits, so the removable limit
// 2||z||^4 (z''^2 + z' z''') / z'^2 takes over.
double energy_at(const Frame& f, double tau, double N) {
  const double z = f.z_at(tau);
  const double zp = f.dz_at(tau);
  const double nn = f.n2 * f.n2;
  if (std::abs(z) < 1e-4 * f.amp) {
    // Only loops that pass through zero reach this branch; those are entire
    // in this frame, so beta = 0 and the plain series are the whole story.
    const double zpp = f.d2z.eval(tau);
    const double zppp = f.d3z.eval(tau);
    return 2.0 * nn * (zpp * zpp + zp * zppp) / (zp * zp);
  }
  return (2.0 * nn * zp * zp - N) / (z * z);
}

// d^2q/dt^2 in base time via the chain rule through dt/dtau = z^2/||z||^2.
double qddot_at(const Frame& f, double tau) {
  const double z = f.z_at(tau);
  const double zp = f.dz_at(tau);
  const double zpp = f.ddz_at(tau);
  return 2.0 * f.n2 * f.n2 * (zpp * z - zp * zp) / (z * z * z * z);
}

// Zeros of the trigonometric interpolant in [0, 2): exact grid hits plus
// bisection-refined sign changes between samples.
std::vector<double> zero_taus(const ZLoop& zl, const TrigSeries& s) {
  std::vector<double> zs;
  const int n = zl.n();
  const double h = zl.grid.h;
  for (int j = 0; j < n; ++j) {
    const double a = zl.v[j];
    const double b = zl.v[(j + 1) % n];
    if (std::abs(a) <= 1e-13) {
      zs.push_back(j * h);
      continue;
    }
    if (a * b < 0.0) {
      double lo = j * h;
      double hi = (j + 1) * h;
      double flo = a;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = s.eval(mid);
        if ((flo < 0.0) == (fm < 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      zs.push_back(0.5 * (lo + hi));
    }
  }
  return zs;
}

// Grid points farther than 5 spacings (in time) from every collision of q2.
std::vector<char> collision_mask(const QOrbit& o) {
  const int n = o.grid.n;
  const double span = 2.0 * o.period;
  const double ht = span / n;
  std::vector<char> keep(n, 1);
  for (int j = 0; j < n; ++j) {
    const double t = j * ht;
    for (const double zt : o.zeros2) {
      double d = std::abs(t - zt);
      d = std::min(d, span - d);
      if (d <= 5.0 * ht) {
        keep[j] = 0;
        break;
      }
    }
  }
  return keep;
}

struct Rhs {
  double r1 = 0.0, r2 = 0.0;
};

// Right-hand sides of the second-order system on the scaled orbit. The
// blended family couples the electrons through the instantaneous gap and the
// gap of the mean radii; the stage-A family uses averaged fields only, with
// the family parameter feeding the inner electron's share.
Rhs ode_rhs(const QOrbit& o, double q1, double q2, double mean_gap2) {
  Rhs rhs;
  if (o.family == Family::Interp) {
    const double gap2 = (q1 - q2) * (q1 - q2);
    rhs.r1 = -o.N / (q1 * q1) + o.r / gap2 + (1.0 - o.r) / mean_gap2;
    rhs.r2 = -o.N / (q2 * q2) - o.r / gap2 - (1.0 - o.r) / mean_gap2;
  } else {
    rhs.r1 = -o.N / (q1 * q1) + 1.0 / mean_gap2;
    rhs.r2 = -o.N / (q2 * q2) - o.r / mean_gap2;
  }
  return rhs;
}

double scaled_mean_gap2(const QOrbit& o) {
  const double cc = o.scale * o.scale;
  const double gap = cc * mean_q(o.z.z1) - cc * mean_q(o.z.z2);
  return gap * gap;
}

}  // namespace

QOrbit make_orbit(const ZPair& p, double r, Family family, double N) {
  if (!(p.z1.grid == p.z2.grid)) throw std::invalid_argument("incompatible grids");
  QOrbit o;
  o.grid = p.z1.grid;
  o.family = family;
  o.r = r;
  o.N = N;
  o.period = 1.0;
  o.scale = 1.0;
  o.z = p;
  o.q1 = z_to_q(p.z1);
  o.q2 = z_to_q(p.z2);

  const Frame f1 = make_frame(p.z1);
  const Frame f2 = make_frame(p.z2);
  const int n = o.grid.n;
  o.E1.resize(n);
  o.E2.resize(n);
  for (int j = 0; j < n; ++j) {
    o.E1[j] = energy_at(f1, f1.tau_at_t[j], N);
    o.E2[j] = energy_at(f2, f2.tau_at_t[j], N);
  }

  const TimeChange tc2(p.z2);
  for (const double tau0 : zero_taus(p.z2, f2.z)) {
    o.zeros2.push_back(tc2.t_of_tau(tau0));
  }
  std::sort(o.zeros2.begin(), o.zeros2.end());
  return o;
}

QOrbit rescale_orbit(const QOrbit& q, double c) {
  QOrbit s = q;
  const double cc = c * c;
  s.period = q.period * c * c * c;
  s.scale = q.scale * c;
  for (int j = 0; j < s.grid.n; ++j) {
    s.q1[j] *= cc;
    s.q2[j] *= cc;
    s.E1[j] /= cc;
    s.E2[j] /= cc;
  }
  for (double& zt : s.zeros2) zt *= c * c * c;
  return s;
}

double ode_residual(const QOrbit& orbit) {
  const int n = orbit.grid.n;
  const Frame f1 = make_frame(orbit.z.z1);
  const Frame f2 = make_frame(orbit.z.z2);
  const double c = orbit.scale;
  const double c4 = c * c * c * c;
  const double mean_gap2 = scaled_mean_gap2(orbit);
  const std::vector<char> keep = collision_mask(orbit);

  double sup = 0.0;
  for (int j = 0; j < n; ++j) {
    if (!keep[j]) continue;
    const double q1 = orbit.q1[j];
    const double q2 = orbit.q2[j];
    const double qdd1 = qddot_at(f1, f1.tau_at_t[j]) / c4;
    const double qdd2 = qddot_at(f2, f2.tau_at_t[j]) / c4;
    const Rhs rhs = ode_rhs(orbit, q1, q2, mean_gap2);
    sup = std::max(sup, std::abs(q1 * (qdd1 - rhs.r1)));
    sup = std::max(sup, std::abs(q2 * (qdd2 - rhs.r2)));
  }
  return sup;
}

EnergyReport energy_checks(const QOrbit& orbit) {
  const int n = orbit.grid.n;
  const double ht = 2.0 * orbit.period / n;
  const double mean_gap2 = scaled_mean_gap2(orbit);
  const std::vector<char> keep = collision_mask(orbit);

  // Conserved combination: the pairwise terms close the work done by the
  // interaction forces, so the total is constant along exact solutions.
  std::vector<double> combo(n);
  for (int j = 0; j < n; ++j) {
    const double q1 = orbit.q1[j];
    const double q2 = orbit.q2[j];
    double inter;
    if (orbit.family == Family::Interp) {
      inter = orbit.r / (q1 - q2) - (1.0 - orbit.r) * (q1 - q2) / mean_gap2;
    } else {
      inter = -(q1 - orbit.r * q2) / mean_gap2;
    }
    combo[j] = orbit.E1[j] + orbit.E2[j] + inter;
  }

  EnergyReport rep;
  double mean = 0.0;
  int kept = 0;
  for (int j = 0; j < n; ++j) {
    if (keep[j]) {
      mean += combo[j];
      ++kept;
    }
  }
  mean /= std::max(kept, 1);
  for (int j = 0; j < n; ++j) {
    if (keep[j]) rep.conserved_variation = std::max(rep.conserved_variation, std::abs(combo[j] - mean));
  }
  rep.total_energy = mean;
  rep.negative = mean < 0.0;

  // Continuity of the inner energy across each collision: quadratic
  // extrapolation from three samples on each side, outside the masked window.
  for (const double zt : orbit.zeros2) {
    const long j0 = std::lround(zt / ht);
    const int offs[3] = {6, 7, 8};
    double side[2] = {0.0, 0.0};
    for (int s = 0; s < 2; ++s) {
      const int sgn = s == 0 ? -1 : 1;
      double ts[3], es[3];
      for (int k = 0; k < 3; ++k) {
        const long idx = j0 + sgn * offs[k];
        ts[k] = static_cast<double>(idx) * ht - zt;
        es[k] = orbit.E2[((idx % n) + n) % n];
      }
      double val = 0.0;  // Lagrange extrapolation to the collision time
      for (int k = 0; k < 3; ++k) {
        double w = 1.0;
        for (int l = 0; l < 3; ++l) {
          if (l != k) w *= (0.0 - ts[l]) / (ts[k] - ts[l]);
        }
        val += w * es[k];
      }
      side[s] = val;
    }
    rep.e2_jump = std::max(rep.e2_jump, std::abs(side[0] - side[1]));
  }
  return rep;
}

RescaleReport rescale_check(const QOrbit& orbit, double c) {
  const QOrbit scaled = rescale_orbit(orbit, c);
  RescaleReport rep;
  rep.residual = ode_residual(scaled);
  const double e0 = energy_checks(orbit).total_energy;
  const double ec = energy_checks(scaled).total_energy;
  rep.energy_rel_error = std::abs(ec - e0 / (c * c)) / std::abs(e0);
  rep.period_ratio = scaled.period / orbit.period;
  return rep;
}

double SymmetryReport::max() const {
  double m = dz1_at_0;
  m = std::fmax(m, z2_at_0);
  m = std::fmax(m, dz1_at_half);
  m = std::fmax(m, dz2_at_half);
  m = std::fmax(m, q_reflection);
  return m;
}

SymmetryReport symmetry_check(const ZPair& p) {
  if (!(p.z1.grid == p.z2.grid)) throw std::invalid_argument("incompatible grids");
  const TrigSeries s1 = TrigSeries::fit(p.z1.v);
  const TrigSeries s2 = TrigSeries::fit(p.z2.v);
  const TrigSeries d1 = s1.derivative();
  const TrigSeries d2 = s2.derivative();

  SymmetryReport rep;
  rep.dz1_at_0 = std::abs(d1.eval(0.0));
  rep.z2_at_0 = std::abs(s2.eval(0.0));
  rep.dz1_at_half = std::abs(d1.eval(0.5));
  rep.dz2_at_half = std::abs(d2.eval(0.5));

  // Reflection t -> 1 - t of the physical profiles; on the uniform time grid
  // the mirror of index j is index n/2 - j.
  const std::vector<double> q1 = z_to_q(p.z1);
  const std::vector<double> q2 = z_to_q(p.z2);
  const int n = p.z1.n();
  for (int j = 0; j < n; ++j) {
    const int mj = ((n / 2 - j) % n + n) % n;
    rep.q_reflection = std::fmax(rep.q_reflection, std::abs(q1[j] - q1[mj]));
    rep.q_reflection = std::fmax(rep.q_reflection, std::abs(q2[j] - q2[mj]));
  }
  return rep;
}

CorrespondenceReport correspondence_check(const ZPair& p, const ModelParams& m) {
  CorrespondenceReport rep;

  double min1 = sup_norm(p.z1);
  bool sign_change1 = false;
  for (int j = 0; j < p.z1.n(); ++j) {
    min1 = std::min(min1, std::abs(p.z1.v[j]));
    if (p.z1.v[j] * p.z1.v[(j + 1) % p.z1.n()] < 0.0) sign_change1 = true;
  }
  rep.z1_zero_free = !sign_change1 && min1 > 1e-9;

  const TrigSeries s2 = TrigSeries::fit(p.z2.v);
  const TrigSeries d2 = s2.derivative();
  int transverse = 0;
  for (const double tau0 : zero_taus(p.z2, s2)) {
    if (tau0 >= 1.0) continue;  // count per fundamental period
    const bool small = std::abs(s2.eval(tau0)) < 1e-9;
    const bool steep = std::abs(d2.eval(tau0)) > 1e-3;
    if (small && steep) ++transverse;
  }
  rep.z2_zero_count = transverse;
  if (transverse != 1) rep.error = "wrong topological class";

  for (const double sgn1 : {1.0, -1.0}) {
    for (const double sgn2 : {1.0, -1.0}) {
      const ZPair branch{sgn1 * p.z1, sgn2 * p.z2};
      const LoopPair g = grad_B(branch, m);
      rep.branch_grad_sup = std::fmax(rep.branch_grad_sup, sup_norm(g.first));
      rep.branch_grad_sup = std::fmax(rep.branch_grad_sup, sup_norm(g.second));
    }
  }
  return rep;
}

double legendre_check(const ZPair& p, const ModelParams& m) {
  const Momentum mom{legendre(p.z1), legendre(p.z2)};
  const auto [res_z, res_eta] = hamilton_residual(p, mom, m);
  double sup = sup_norm(res_z.first);
  sup = std::fmax(sup, sup_norm(res_z.second));
  sup = std::fmax(sup, sup_norm(res_eta.first));
  sup = std::fmax(sup, sup_norm(res_eta.second));
  return sup;
}

double gradcheck(FunctionalId id, const ZPair& p, const ModelParams& m, int n_dirs,
                 std::uint64_t seed) {
  const auto value = [&](const ZPair& q) -> double {
    switch (id) {
      case FunctionalId::Q:
        return eval_Q(q.z1, m.N) + eval_Q(q.z2, m.N);
      case FunctionalId::A:
        return eval_A(q);
      case FunctionalId::I:
        return eval_I(q);
      case FunctionalId::B:
        return eval_B(q, m);
    }
    return 0.0;
  };
  const auto slope = [&](const ZLoop& v1, const ZLoop& v2) -> double {
    switch (id) {
      case FunctionalId::Q:
        return dirderiv_Q(p.z1, v1, m.N) + dirderiv_Q(p.z2, v2, m.N);
      case FunctionalId::A:
        return dirderiv_A(p, v1, v2);
      case FunctionalId::I:
        return dirderiv_I(p, v1, v2);
      case FunctionalId::B:
        return dirderiv_B(p, v1, v2, m);
    }
    return 0.0;
  };

  std::mt19937_64 rng(seed);
  const double eps = 1e-6;
  double worst = 0.0;
  for (int d = 0; d < n_dirs; ++d) {
    const ZLoop v1 = random_loop(p.z1.grid, p.z1.cls, rng, 4, 0.5);
    const ZLoop v2 = random_loop(p.z2.grid, p.z2.cls, rng, 4, 0.5);
    const ZPair plus{p.z1 + eps * v1, p.z2 + eps * v2};
    const ZPair minus{p.z1 - eps * v1, p.z2 - eps * v2};
    const double fd = (value(plus) - value(minus)) / (2.0 * eps);
    const double ex = slope(v1, v2);
    worst = std::fmax(worst, std::abs(fd - ex) / std::fmax(1.0, std::abs(ex)));
  }
  return worst;
}

}  // namespace fpo
