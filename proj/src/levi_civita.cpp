#include "fpo/levi_civita.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

namespace fpo {
namespace {

// Largest run of consecutive samples (cyclically) with |z| below tol.
int longest_small_run(const std::vector<double>& v, double tol) {
  const int n = static_cast<int>(v.size());
  int best = 0, run = 0;
  for (int j = 0; j < 2 * n; ++j) {
    if (std::abs(v[j % n]) <= tol) {
      ++run;
      best = std::max(best, std::min(run, n));
    } else {
      run = 0;
    }
  }
  return best;
}

void require_not_degenerate(const ZLoop& z) {
  double m = sup_norm(z);
  if (m == 0.0 || longest_small_run(z.v, 1e-13 * std::max(m, 1.0)) >= 3)
    throw std::runtime_error("degenerate loop");
}

}  // namespace

TimeChange::TimeChange(const ZLoop& z) {
  require_not_degenerate(z);
  n_ = z.grid.n;
  z_series_ = TrigSeries::fit(z.v);
  dz_series_ = z_series_.derivative();
  std::vector<double> zsq(n_);
  for (int j = 0; j < n_; ++j) zsq[j] = z.v[j] * z.v[j];
  zsq_series_ = TrigSeries::fit(zsq);
  nrm2_ = zsq_series_.mean();  // (1/2) * int_0^2 z^2 dtau
  t_of_tau_grid_.resize(n_);
  for (int j = 0; j < n_; ++j) t_of_tau_grid_[j] = zsq_series_.eval_antideriv(z.grid.tau(j)) / nrm2_;
  for (int j = 0; j + 1 < n_; ++j)
    if (!(t_of_tau_grid_[j + 1] > t_of_tau_grid_[j])) throw std::runtime_error("degenerate loop");
}

double TimeChange::t_of_tau(double tau) const {
  // The antiderivative of z^2/||z||^2 is tau plus a 2-periodic part, so reduce
  // the argument and restore the linear term.
  const double k = std::floor(tau / 2.0);
  const double tr = tau - 2.0 * k;
  return zsq_series_.eval_antideriv(tr) / nrm2_ + 2.0 * k;
}

double TimeChange::tau_of_t(double t) const {
  const double k = std::floor(t / 2.0);
  const double tr = t - 2.0 * k;
  if (tr == 0.0) return 2.0 * k;  // collision fixed point, exactly
  // Bracket from the node table, then safeguarded Newton; near collisions
  // dt/dtau vanishes and the bisection half of the loop carries the load.
  // Termination is on bracket width in tau (not on the t-residual): near a
  // collision a small t-residual still allows large tau errors, and the
  // downstream kernels need tau to full precision to stay smooth in z.
  auto it = std::upper_bound(t_of_tau_grid_.begin(), t_of_tau_grid_.end(), tr);
  int j = static_cast<int>(it - t_of_tau_grid_.begin()) - 1;
  double a = (2.0 / n_) * j;
  double b = (j + 1 < n_) ? (2.0 / n_) * (j + 1) : 2.0;
  double x = 0.5 * (a + b);
  for (int iter = 0; iter < 110; ++iter) {
    const double f = zsq_series_.eval_antideriv(x) / nrm2_ - tr;
    if (f > 0)
      b = x;
    else
      a = x;
    if (b - a < 5e-16) break;
    const double fp = std::max(zsq_series_.eval(x), 0.0) / nrm2_;
    double xn = (fp > 1e-12) ? x - f / fp : a;
    x = (xn > a && xn < b) ? xn : 0.5 * (a + b);
  }
  return x + 2.0 * k;
}

std::vector<double> TimeChange::tau_of_t_array(const std::vector<double>& ts) const {
  std::vector<double> out(ts.size());
  double prev = ts.empty() ? 0.0 : tau_of_t(ts[0]);
  if (!ts.empty()) out[0] = prev;
  for (size_t i = 1; i < ts.size(); ++i) {
    const double target = ts[i];
    // Predictor: previous tau; corrector: plain Newton. Accept only when the
    // slope is healthy, so the tau error stays at the 1e-11 level; otherwise
    // fall back to the fully safeguarded bracketed inversion.
    double x = prev;
    bool ok = false;
    for (int it = 0; it < 10; ++it) {
      const double f = t_of_tau(x) - target;
      const double fp = zsq_series_.eval(x - 2.0 * std::floor(x / 2.0)) / nrm2_;
      if (fp < 1e-3) break;  // too close to a collision for the march
      if (std::abs(f) < 1e-14) {
        ok = true;
        break;
      }
      x -= f / fp;
      if (!(x > prev - 1.0 && x < prev + 1.0)) break;  // runaway step
    }
    if (!ok) x = tau_of_t(target);
    out[i] = x;
    prev = x;
  }
  return out;
}

std::vector<double> z_to_q(const ZLoop& z) {
  TimeChange tc(z);
  const int n = z.grid.n;
  std::vector<double> q(n);
  std::vector<double> ts(n);
  for (int i = 0; i < n; ++i) ts[i] = z.grid.h * i;
  const std::vector<double> taus = tc.tau_of_t_array(ts);
  q[0] = z.v[0] * z.v[0];  // t = 0 is a fixed point of the time change
  for (int i = 1; i < n; ++i) {
    const double zz = tc.z_at(taus[i]);
    q[i] = zz * zz;
  }
  return q;
}

std::vector<double> cross_eval(const ZLoop& za, const ZLoop& zb) {
  if (zb.grid.n != za.grid.n) throw std::invalid_argument("incompatible grids");
  TimeChange ta(za), tb(zb);
  const int n = za.grid.n;
  const std::vector<double> taus = tb.tau_of_t_array(ta.t_grid());
  std::vector<double> w(n);
  for (int j = 0; j < n; ++j) w[j] = tb.z_at(taus[j]);
  return w;
}

double mean_q(const ZLoop& z) {
  // ||z^2||^2 / ||z||^2: the time average of q through the chart, exactly.
  double s2 = 0.0, s4 = 0.0;
  for (double x : z.v) {
    const double xx = x * x;
    s2 += xx;
    s4 += xx * xx;
  }
  if (s2 <= 0) throw std::runtime_error("degenerate loop");
  return s4 / s2;
}

double mean_inv_q(const ZLoop& z) {
  const double n2 = norm2(z);
  if (n2 <= 0) throw std::runtime_error("degenerate loop");
  return 1.0 / n2;
}

double qdot_norm2(const ZLoop& z) { return 4.0 * norm2(z) * norm2(derivative(z)); }

std::vector<double> kepler_energy(const ZLoop& z, double N) {
  require_not_degenerate(z);
  const double n2 = norm2(z);
  const double n4 = n2 * n2;
  const TrigSeries s = TrigSeries::fit(z.v).thresholded(1e-14);
  const TrigSeries d1 = s.derivative();
  const TrigSeries d2 = d1.derivative();
  const TrigSeries d3 = d2.derivative();
  const double scale = sup_norm(z);
  const int n = z.grid.n;
  std::vector<double> E(n);
  for (int j = 0; j < n; ++j) {
    const double tau = z.grid.tau(j);
    const double zj = z.v[j];
    if (std::abs(zj) > 1e-8 * scale) {
      const double dz = d1.eval(tau);
      E[j] = (2.0 * n4 * dz * dz - N) / (zj * zj);
    } else {
      // Removable singularity at a transverse zero: the continuous extension
      // is 2 ||z||^4 (z''^2 + z' z''') / z'^2.
      const double alpha = d1.eval(tau);
      if (alpha * alpha <= 1e-12 * scale * scale)
        throw std::runtime_error("non-transverse collision");
      const double beta = d2.eval(tau);
      const double gamma = d3.eval(tau);
      E[j] = 2.0 * n4 * (beta * beta + alpha * gamma) / (alpha * alpha);
    }
  }
  return E;
}

// ---------------------------------------------------------------------------
// q -> z reconstruction.
//
// Strategy: build a moderate-accuracy initial loop (direct square roots away
// from collisions, a linear model of z through each collision, time change by
// singularity-splitting quadrature), then polish it by Gauss-Newton on the
// forward map z -> z_to_q(z) restricted to the requested symmetry class. The
// polish supplies the final accuracy, so the initial stage only has to land
// in the Newton basin.
// ---------------------------------------------------------------------------
namespace {

struct Collision {
  int center = 0;       // sample index of the local minimum
  double t_star = 0.0;  // refined collision time
  double A = 0.0;       // leading cusp coefficient: q ~ A |t-t*|^(2/3)
};

// Least-squares fit of q = |t-t*|^(2/3) (c0 + c1 x + c2 x^2) near a candidate
// collision; returns the residual and optionally c0.
double cusp_fit(const std::vector<double>& q, double h, int center, double t_star, int span,
                double* c0_out) {
  const int n = static_cast<int>(q.size());
  const int m = 3;
  const double xscale = span * h;
  double ata[9] = {0}, atb[3] = {0};
  for (int o = -span; o <= span; ++o) {
    const double x = (center + o) * h - t_star;
    if (std::abs(x) < 0.3 * h) continue;
    const double y = q[((center + o) % n + n) % n] / std::cbrt(x * x);
    const double row[3] = {1.0, x / xscale, (x / xscale) * (x / xscale)};
    for (int r = 0; r < m; ++r) {
      atb[r] += row[r] * y;
      for (int c = 0; c < m; ++c) ata[r * m + c] += row[r] * row[c];
    }
  }
  // Solve the 3x3 normal equations by Gaussian elimination with pivoting.
  double M[3][4];
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) M[r][c] = ata[r * m + c];
    M[r][3] = atb[r];
  }
  for (int p = 0; p < 3; ++p) {
    int piv = p;
    for (int r = p + 1; r < 3; ++r)
      if (std::abs(M[r][p]) > std::abs(M[piv][p])) piv = r;
    for (int c = 0; c < 4; ++c) std::swap(M[p][c], M[piv][c]);
    if (std::abs(M[p][p]) < 1e-300) return 1e300;
    for (int r = p + 1; r < 3; ++r) {
      const double f = M[r][p] / M[p][p];
      for (int c = p; c < 4; ++c) M[r][c] -= f * M[p][c];
    }
  }
  double sol[3];
  for (int r = 2; r >= 0; --r) {
    double s = M[r][3];
    for (int c = r + 1; c < 3; ++c) s -= M[r][c] * sol[c];
    sol[r] = s / M[r][r];
  }
  double rss = 0.0;
  for (int o = -span; o <= span; ++o) {
    const double x = (center + o) * h - t_star;
    if (std::abs(x) < 0.3 * h) continue;
    const double y = q[((center + o) % n + n) % n] / std::cbrt(x * x);
    const double xn = x / xscale;
    const double fit = sol[0] + sol[1] * xn + sol[2] * xn * xn;
    rss += (y - fit) * (y - fit);
  }
  if (c0_out) *c0_out = sol[0];
  return rss;
}

// int_{ta}^{tb} dt / (A |t-t*|^(2/3)) with the substitution u = (t-t*)^(1/3):
// exact, and valid through the collision.
double cusp_window_integral(double A, double t_star, double ta, double tb) {
  return 3.0 * (std::cbrt(tb - t_star) - std::cbrt(ta - t_star)) / A;
}

}  // namespace

ZLoop q_to_z(const std::vector<double>& q, LoopGrid g, SymmetryClass cls, double sign) {
  const int n = g.n;
  if (sign != 1.0 && sign != -1.0) throw std::invalid_argument("sign must be +1 or -1");
  if (static_cast<int>(q.size()) != n) throw std::invalid_argument("incompatible grids");
  const double h = g.h;
  const double maxq = *std::max_element(q.begin(), q.end());
  if (maxq <= 0) throw std::runtime_error("degenerate loop");

  // --- collision detection: local minima well below the orbit scale.
  std::vector<int> centers;
  for (int i = 0; i < n; ++i) {
    const double qm = q[(i + n - 1) % n], qp = q[(i + 1) % n];
    if (q[i] < 0.12 * maxq && q[i] <= qm && q[i] <= qp) centers.push_back(i);
  }

  const int kSpan = 20;  // cusp-fit half-width in samples
  std::vector<Collision> cols;
  for (int c0 : centers) {
    // Local decay exponent: a transverse collision has q ~ |t-t*|^(2/3).
    auto qa = [&](int off) {
      return 0.5 * (q[((c0 + off) % n + n) % n] + q[((c0 - off) % n + n) % n]);
    };
    const double p = std::log(qa(6) / qa(3)) / std::log(2.0);
    const bool deep = q[c0] < 1e-3 * maxq;
    if (p < 0.45 || p > 0.9) {
      if (deep) throw std::runtime_error("collision not regularizable");
      continue;  // ordinary shallow minimum
    }
    if (!deep && q[c0] > 0.05 * maxq) continue;

    Collision col;
    col.center = c0;
    if (q[c0] <= 1e-14 * maxq) {
      col.t_star = c0 * h;
      cusp_fit(q, h, c0, col.t_star, kSpan, &col.A);
    } else {
      // Golden-section refinement of the fit residual over t*.
      double a = (c0 - 1) * h, b = (c0 + 1) * h;
      const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
      double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
      double f1 = cusp_fit(q, h, c0, x1, kSpan, nullptr);
      double f2 = cusp_fit(q, h, c0, x2, kSpan, nullptr);
      for (int it = 0; it < 50; ++it) {
        if (f1 < f2) {
          b = x2; x2 = x1; f2 = f1;
          x1 = b - gr * (b - a);
          f1 = cusp_fit(q, h, c0, x1, kSpan, nullptr);
        } else {
          a = x1; x1 = x2; f1 = f2;
          x2 = a + gr * (b - a);
          f2 = cusp_fit(q, h, c0, x2, kSpan, nullptr);
        }
      }
      col.t_star = 0.5 * (a + b);
      cusp_fit(q, h, c0, col.t_star, kSpan, &col.A);
    }
    if (col.A <= 0) throw std::runtime_error("collision not regularizable");
    cols.push_back(col);
  }
  if (cols.size() > 1) {
    for (size_t i = 0; i < cols.size(); ++i) {
      const int a = cols[i].center;
      const int b = (i + 1 < cols.size()) ? cols[i + 1].center : cols[0].center + n;
      if (b - a < 2 * kSpan + 4) throw std::runtime_error("collision not regularizable");
    }
  }

  // Topological parity: collisions per unit period must match the class.
  if (cols.size() % 2 != 0) throw std::runtime_error("parity mismatch");
  const int per_period = static_cast<int>(cols.size()) / 2;
  const bool want_odd =
      (cls == SymmetryClass::Antiperiodic || cls == SymmetryClass::SymmetricAntiperiodic);
  if (cls != SymmetryClass::Plain && want_odd != (per_period % 2 == 1))
    throw std::runtime_error("parity mismatch");

  // --- time change by quadrature: trapezoid off-window; inside windows the
  // cusp part integrates exactly under u = (t-t*)^(1/3) and the bounded
  // remainder 1/q - 1/model goes back to the trapezoid.
  const int kWin = 8;
  // Rotate the origin to the point farthest from all collisions so windows do
  // not straddle the array seam.
  int shift = 0;
  if (!cols.empty()) {
    std::vector<int> cc;
    for (auto& c : cols) cc.push_back(c.center);
    std::sort(cc.begin(), cc.end());
    int best_gap = -1;
    for (size_t i = 0; i < cc.size(); ++i) {
      const int a = cc[i];
      const int b = (i + 1 < cc.size()) ? cc[i + 1] : cc[0] + n;
      if (b - a > best_gap) {
        best_gap = b - a;
        shift = (a + (b - a) / 2) % n;
      }
    }
  }
  std::vector<Collision> rcols = cols;
  for (auto& c : rcols) {
    const int rc = ((c.center - shift) % n + n) % n;
    c.t_star += (rc - c.center) * h;
    c.center = rc;
  }
  auto qr = [&](int k) { return q[((k + shift) % n + n) % n]; };
  std::vector<int> win_idx(n + 1, -1);
  for (size_t ci = 0; ci < rcols.size(); ++ci)
    for (int o = -kWin; o <= kWin; ++o) {
      const int idx = rcols[ci].center + o;
      if (idx >= 0 && idx <= n) win_idx[idx] = static_cast<int>(ci);
    }

  std::vector<double> F(n + 1, 0.0);  // int_0^{kh} dt/q in the rotated frame
  for (int k = 0; k < n; ++k) {
    double inc;
    const int wi = (win_idx[k] >= 0) ? win_idx[k] : win_idx[k + 1];
    if (wi >= 0) {
      const auto& c = rcols[wi];
      inc = cusp_window_integral(c.A, c.t_star, k * h, (k + 1) * h);
      auto rest = [&](int kk) {
        const double x = kk * h - c.t_star;
        if (std::abs(x) < 0.3 * h) return 0.0;  // bounded remainder; skip the cusp node
        return 1.0 / qr(kk) - 1.0 / (c.A * std::cbrt(x * x));
      };
      inc += 0.5 * h * (rest(k) + rest(k + 1));
    } else {
      inc = 0.5 * h * (1.0 / qr(k) + 1.0 / qr(k + 1));
    }
    F[k + 1] = F[k] + inc;
  }
  const double M = F[n];
  const double zn2 = 2.0 / M;  // ||z||^2 = 1 / mean(1/q)

  std::vector<double> tau_r(n + 1);
  for (int k = 0; k <= n; ++k) tau_r[k] = zn2 * F[k];
  std::vector<double> tau_star(rcols.size());
  for (size_t ci = 0; ci < rcols.size(); ++ci) {
    const auto& c = rcols[ci];
    const int kc = std::clamp(static_cast<int>(std::floor(c.t_star / h)), 0, n - 1);
    tau_star[ci] = zn2 * (F[kc] + cusp_window_integral(c.A, c.t_star, kc * h, c.t_star));
  }

  const int rot0 = ((0 - shift) % n + n) % n;
  const double tau_base = tau_r[rot0];

  // --- initial guess: invert the tau table linearly, take square roots with
  // an alternating sign, and use z ~ alpha (tau - tau*) through collisions,
  // where alpha solves the self-consistency with the cusp coefficient:
  // q ~ A|t-t*|^(2/3), t-t* ~ alpha^2 s^3/(3||z||^2) => alpha = A^(3/2)/(3||z||^2).
  ZLoop out = ZLoop::zeros(g, cls);
  std::vector<double> ts_sorted(tau_star);
  std::sort(ts_sorted.begin(), ts_sorted.end());
  auto sign_at = [&](double tau_rot) {
    int crossings = 0;
    for (double ts : ts_sorted)
      if (ts < tau_rot) ++crossings;
    int base = 0;
    for (double ts : ts_sorted)
      if (ts < tau_base) ++base;
    return ((crossings - base) % 2 != 0) ? -1.0 : 1.0;
  };
  const double hole = 6.0 * h;  // tau half-width handled by the linear model
  for (int i = 0; i < n; ++i) {
    double tau_t = tau_base + g.tau(i);
    if (tau_t >= 2.0) tau_t -= 2.0;
    double ds_min = 1e300;
    int ci_near = -1;
    for (size_t ci = 0; ci < tau_star.size(); ++ci)
      for (int wrap = -1; wrap <= 1; ++wrap) {
        const double d = tau_t - (tau_star[ci] + 2.0 * wrap);
        if (std::abs(d) < std::abs(ds_min)) {
          ds_min = d;
          ci_near = static_cast<int>(ci);
        }
      }
    if (ci_near >= 0 && std::abs(ds_min) < hole) {
      const double alpha = std::pow(rcols[ci_near].A, 1.5) / (3.0 * zn2);
      // Sign just before the collision, flipped on the far side.
      const double sgn_before = sign_at(tau_t - ds_min - 1e-12);
      out.v[i] = (ds_min < 0 ? sgn_before : -sgn_before) * alpha * std::abs(ds_min);
      continue;
    }
    auto itb = std::upper_bound(tau_r.begin(), tau_r.end(), tau_t);
    int j = std::clamp(static_cast<int>(itb - tau_r.begin()) - 1, 0, n - 1);
    const double frac = (tau_t - tau_r[j]) / std::max(tau_r[j + 1] - tau_r[j], 1e-300);
    const double t = (j + frac) * h;
    int sq = std::clamp(static_cast<int>(std::floor(t / h)) - 1, 0, n - 4);
    double qv = 0.0;
    for (int a2 = 0; a2 < 4; ++a2) {
      double L = qr(sq + a2);
      for (int b2 = 0; b2 < 4; ++b2)
        if (b2 != a2) L *= (t - (sq + b2) * h) / ((a2 - b2) * h);
      qv += L;
    }
    out.v[i] = sign_at(tau_t) * std::sqrt(std::max(qv, 0.0));
  }

  // Fix the global branch: positive right after tau = 0; the requested sign is
  // applied after the polish so the +/- results are exact negatives.
  for (int i = 0; i < n; ++i) {
    if (std::abs(out.v[i]) > 0.25 * std::sqrt(maxq)) {
      if (out.v[i] < 0)
        for (double& x : out.v) x = -x;
      break;
    }
  }
  out = project_symmetry(out, cls);

  // --- Gauss-Newton polish on the forward map restricted to the class chart.
  //
  // The discrete forward map is nearly blind to high-mode perturbations
  // concentrated at collisions (the cusp compresses a wide tau neighborhood
  // into a fraction of one t sample), so the least-squares problem has
  // near-null directions there. A mode-weighted ridge selects the smooth
  // representative, which is the correct prior: admissible loops are analytic.
  const ClassBasis basis = class_basis(g, cls);
  const int m = basis.size();
  auto decode = [&](const std::vector<double>& x) {
    ZLoop z = ZLoop::zeros(g, cls);
    for (int c = 0; c < m; ++c)
      for (int i = 0; i < n; ++i) z.v[i] += x[c] * basis.cols[c][i];
    return z;
  };
  auto encode = [&](const ZLoop& z) {
    std::vector<double> x(m, 0.0);
    for (int c = 0; c < m; ++c) {
      double dot = 0.0;
      for (int i = 0; i < n; ++i) dot += basis.cols[c][i] * z.v[i];
      x[c] = dot * (g.h / 2.0);
    }
    return x;
  };
  auto residual = [&](const std::vector<double>& x, std::vector<double>* r) {
    std::vector<double> qz;
    try {
      qz = z_to_q(decode(x));
    } catch (const std::exception&) {
      return false;
    }
    r->resize(n);
    for (int i = 0; i < n; ++i) (*r)[i] = qz[i] - q[i];
    return true;
  };

  std::vector<double> x = encode(out);
  std::vector<double> r0;
  if (const char* dbg = std::getenv("FPO_QZ_DEBUG")) {
    (void)dbg;
    std::fprintf(stderr, "[qz] m=%d cols=%zu shift=%d tau_base=%.15g zn2=%.15g\n", m, cols.size(),
                 shift, tau_base, zn2);
    for (size_t ci = 0; ci < rcols.size(); ++ci)
      std::fprintf(stderr, "[qz] col %zu: center=%d t*=%.15g A=%.15g tau*=%.15g\n", ci,
                   rcols[ci].center, rcols[ci].t_star, rcols[ci].A, tau_star[ci]);
  }
  if (residual(x, &r0)) {
    // Ridge weights ~ (k/(n/2))^4 relative to the Jacobian scale; negligible
    // bias on the resolved band, dominant on the blind cusp modes.
    std::vector<double> ridge(m, 0.0);
    auto phi_of = [&](const std::vector<double>& xv, const std::vector<double>& rv) {
      double p = 0.0;
      for (double v : rv) p += v * v;
      for (int c = 0; c < m; ++c) p += ridge[c] * xv[c] * xv[c];
      return p;
    };
    double rsup = 0.0;
    for (double v : r0) rsup = std::max(rsup, std::abs(v));
    if (std::getenv("FPO_QZ_DEBUG")) std::fprintf(stderr, "[qz] initial rsup=%.3e\n", rsup);
    double prev_rsup = 1e300;
    for (int outer = 0; outer < 12 && rsup > 1e-12 * maxq; ++outer) {
      if (rsup > 0.9 * prev_rsup) break;  // stalled
      prev_rsup = rsup;
      const double eps = 1e-6 * std::sqrt(maxq);
      std::vector<std::vector<double>> J(m);
      bool ok = true;
      for (int c = 0; c < m && ok; ++c) {
        std::vector<double> xp = x;
        xp[c] += eps;
        std::vector<double> rp;
        ok = residual(xp, &rp);
        if (!ok) break;
        J[c].resize(n);
        for (int i = 0; i < n; ++i) J[c][i] = (rp[i] - r0[i]) / eps;
      }
      if (!ok) break;
      // Normal equations (J^T J + R + lm I) d = -(J^T r + R x).
      std::vector<double> ata(static_cast<size_t>(m) * m, 0.0), atb(m, 0.0);
      for (int a2 = 0; a2 < m; ++a2) {
        for (int b2 = a2; b2 < m; ++b2) {
          double s = 0.0;
          for (int i = 0; i < n; ++i) s += J[a2][i] * J[b2][i];
          ata[a2 * m + b2] = ata[b2 * m + a2] = s;
        }
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += J[a2][i] * r0[i];
        atb[a2] = -s;
      }
      double trace = 0.0;
      for (int a2 = 0; a2 < m; ++a2) trace += ata[a2 * m + a2];
      for (int c = 0; c < m; ++c) {
        const double kr = static_cast<double>(basis.k[c]) / (n / 2);
        ridge[c] = 1e-3 * (trace / m) * kr * kr * kr * kr;
      }
      const double lm = 1e-12 * trace / m;
      for (int a2 = 0; a2 < m; ++a2) {
        ata[a2 * m + a2] += lm + ridge[a2];
        atb[a2] -= ridge[a2] * x[a2];
      }
      std::vector<double> L(static_cast<size_t>(m) * m, 0.0), d(m, 0.0);
      bool chol_ok = true;
      for (int i = 0; i < m && chol_ok; ++i) {
        for (int jj = 0; jj <= i; ++jj) {
          double sum = ata[i * m + jj];
          for (int kk = 0; kk < jj; ++kk) sum -= L[i * m + kk] * L[jj * m + kk];
          if (i == jj) {
            if (sum <= 0) {
              chol_ok = false;
              break;
            }
            L[i * m + i] = std::sqrt(sum);
          } else {
            L[i * m + jj] = sum / L[jj * m + jj];
          }
        }
      }
      if (!chol_ok) break;
      for (int i = 0; i < m; ++i) {
        double sum = atb[i];
        for (int kk = 0; kk < i; ++kk) sum -= L[i * m + kk] * d[kk];
        d[i] = sum / L[i * m + i];
      }
      for (int i = m - 1; i >= 0; --i) {
        double sum = d[i];
        for (int kk = i + 1; kk < m; ++kk) sum -= L[kk * m + i] * d[kk];
        d[i] = sum / L[i * m + i];
      }
      const double phi0 = phi_of(x, r0);
      double step = 1.0;
      bool improved = false;
      for (int half = 0; half < 8; ++half, step *= 0.5) {
        std::vector<double> xt = x;
        for (int c = 0; c < m; ++c) xt[c] += step * d[c];
        std::vector<double> rt;
        if (!residual(xt, &rt)) continue;
        if (phi_of(xt, rt) < phi0) {
          x = std::move(xt);
          r0 = std::move(rt);
          improved = true;
          break;
        }
      }
      rsup = 0.0;
      for (double v : r0) rsup = std::max(rsup, std::abs(v));
      if (std::getenv("FPO_QZ_DEBUG"))
        std::fprintf(stderr, "[qz] outer=%d rsup=%.3e improved=%d step=%.3g\n", outer, rsup,
                     int(improved), step);
      if (!improved) break;
    }
    out = decode(x);
  } else if (std::getenv("FPO_QZ_DEBUG")) {
    std::fprintf(stderr, "[qz] initial residual threw\n");
  }
  if (sign < 0)
    for (double& xv : out.v) xv = -xv;
  return out;
}

}  // namespace fpo
