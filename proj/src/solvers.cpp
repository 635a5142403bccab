#include "fpo/solvers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fpo {
namespace {

// ---------------------------------------------------------------------------
// Orthonormal class-basis coordinates. Solving in these coordinates keeps
// every iterate inside the declared symmetry class (decode spans the class
// exactly) and makes the Jacobian square on the class directions.
// ---------------------------------------------------------------------------

Eigen::VectorXd basis_coords(const ClassBasis& basis, const ZLoop& z) {
  Eigen::VectorXd x(basis.size());
  const double w = 0.5 * z.grid.h;
  for (int c = 0; c < basis.size(); ++c) {
    const std::vector<double>& col = basis.cols[c];
    double s = 0.0;
    for (int j = 0; j < z.n(); ++j) s += col[j] * z.v[j];
    x[c] = w * s;
  }
  return x;
}

void basis_expand(const ClassBasis& basis, const Eigen::VectorXd& x, int offset,
                  ZLoop* out) {
  std::fill(out->v.begin(), out->v.end(), 0.0);
  for (int c = 0; c < basis.size(); ++c) {
    const double xc = x[offset + c];
    if (xc == 0.0) continue;
    const std::vector<double>& col = basis.cols[c];
    for (int j = 0; j < out->n(); ++j) out->v[j] += xc * col[j];
  }
}

struct PairChart {
  LoopGrid g;
  SymmetryClass c1, c2;
  ClassBasis b1, b2;

  static PairChart make(const ZPair& p) {
    return PairChart{p.z1.grid, p.z1.cls, p.z2.cls,
                     class_basis(p.z1.grid, p.z1.cls),
                     class_basis(p.z2.grid, p.z2.cls)};
  }
  int dim() const { return b1.size() + b2.size(); }

  Eigen::VectorXd encode(const ZPair& p) const {
    Eigen::VectorXd x(dim());
    x.head(b1.size()) = basis_coords(b1, p.z1);
    x.tail(b2.size()) = basis_coords(b2, p.z2);
    return x;
  }
  Eigen::VectorXd encode_residual(const LoopPair& f) const {
    Eigen::VectorXd x(dim());
    x.head(b1.size()) = basis_coords(b1, f.first);
    x.tail(b2.size()) = basis_coords(b2, f.second);
    return x;
  }
  ZPair decode(const Eigen::VectorXd& x) const {
    ZPair p{ZLoop::zeros(g, c1), ZLoop::zeros(g, c2)};
    basis_expand(b1, x, 0, &p.z1);
    basis_expand(b2, x, b1.size(), &p.z2);
    return p;
  }
};

// ---------------------------------------------------------------------------
// Levenberg-damped Newton core, shared by the pair and single-loop fronts.
// The Jacobian is one-sided finite differences on the basis coordinates and
// is reused across iterations (chord steps) while it still contracts the
// residual by 10x; otherwise it is rebuilt at the current iterate.
// ---------------------------------------------------------------------------

struct EvalOut {
  Eigen::VectorXd r;  // residual coordinates in the orthonormal basis
  double sup = 0.0;   // sup-norm of the raw residual arrays
};

struct CoreReport {
  bool converged = false;
  int iterations = 0;
  double final_sup = 0.0;
  double min_sv = 0.0;
  std::string message;
  Eigen::VectorXd x;
};

// eval returns false when the map rejects the point (domain violation).
using CoreEval = std::function<bool(const Eigen::VectorXd&, EvalOut*)>;
using CoreAdmit = std::function<bool(const Eigen::VectorXd&)>;

double smallest_singular_value(const Eigen::MatrixXd& J, double* largest = nullptr) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
  const Eigen::VectorXd& s = svd.singularValues();
  if (largest != nullptr) *largest = s.size() > 0 ? s[0] : 0.0;
  return s.size() > 0 ? s[s.size() - 1] : 0.0;
}

CoreReport newton_core(const CoreEval& eval, const CoreAdmit& admissible,
                       const Eigen::VectorXd& x0, const SolveOptions& opt) {
  CoreReport rep;
  rep.x = x0;

  EvalOut cur;
  if (!eval(x0, &cur)) {
    rep.message = "domain exit";
    return rep;
  }
  rep.final_sup = cur.sup;
  if (cur.sup <= opt.grad_tol) {
    rep.converged = true;
    rep.message = "converged";
    return rep;
  }

  const int m = static_cast<int>(x0.size());
  Eigen::MatrixXd J;
  bool have_jacobian = false;
  bool fresh = false;
  double lambda = opt.damping;

  const auto build_jacobian = [&]() -> bool {
    J.resize(cur.r.size(), m);
    EvalOut probe;
    for (int c = 0; c < m; ++c) {
      Eigen::VectorXd xp = rep.x;
      xp[c] += opt.fd_step;
      if (eval(xp, &probe)) {
        J.col(c) = (probe.r - cur.r) / opt.fd_step;
        continue;
      }
      xp[c] = rep.x[c] - opt.fd_step;  // domain boundary: probe the other side
      if (!eval(xp, &probe)) return false;
      J.col(c) = (cur.r - probe.r) / opt.fd_step;
    }
    return true;
  };

  while (rep.iterations < opt.max_iter) {
    if (!have_jacobian) {
      if (!build_jacobian()) {
        rep.message = "domain exit";
        rep.final_sup = cur.sup;
        return rep;
      }
      have_jacobian = true;
      fresh = true;
    }
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    const Eigen::VectorXd Jtr = J.transpose() * cur.r;

    bool accepted = false;
    bool domain_blocked = false;
    while (true) {
      Eigen::MatrixXd M = JtJ;
      M.diagonal().array() += lambda;
      const Eigen::VectorXd step = M.ldlt().solve(-Jtr);
      const Eigen::VectorXd xt = rep.x + step;
      EvalOut trial;
      const bool ok = eval(xt, &trial);
      const bool decrease = ok && trial.r.norm() < cur.r.norm();
      const bool admit = decrease && admissible(xt);
      if (admit) {
        const double ratio = trial.r.norm() / std::max(cur.r.norm(), 1e-300);
        rep.x = xt;
        cur = trial;
        ++rep.iterations;
        lambda = std::max(lambda / 3.0, 1e-14);
        if (!fresh && ratio > 0.1) have_jacobian = false;  // stale chord
        fresh = false;
        accepted = true;
        break;
      }
      domain_blocked = !ok || (decrease && !admit);
      lambda *= 8.0;
      if (lambda > 1e10) break;
    }

    if (!accepted) {
      if (!fresh) {  // retry this iteration with a fresh Jacobian
        have_jacobian = false;
        lambda = opt.damping;
        continue;
      }
      double smax = 0.0;
      rep.min_sv = smallest_singular_value(J, &smax);
      rep.final_sup = cur.sup;
      rep.message = domain_blocked ? "domain exit" : "rank deficient";
      return rep;
    }
    if (cur.sup <= opt.grad_tol) {
      rep.converged = true;
      break;
    }
  }

  rep.final_sup = cur.sup;
  rep.min_sv = smallest_singular_value(J);
  rep.message = rep.converged ? "converged" : "max iterations";
  return rep;
}

}  // namespace

// ---------------------------------------------------------------------------
// Analytic seeds.
// ---------------------------------------------------------------------------

ZLoop kepler_seed(LoopGrid g, double N) {
  constexpr double pi = std::numbers::pi;
  const double zeta = std::pow(2.0 * N / (pi * pi), 1.0 / 6.0);
  ZLoop z = ZLoop::zeros(g, SymmetryClass::SymmetricAntiperiodic);
  for (int j = 0; j < g.n; ++j) z.v[j] = zeta * std::sin(pi * g.tau(j));
  return z;
}

ZPair decoupled_seed(LoopGrid g, double N) {
  ZPair p{ZLoop::zeros(g, SymmetryClass::SymmetricPeriodic1), kepler_seed(g, N)};
  // Mean radius of the inner orbit, computed from the discrete norms so the
  // constant outer loop is a zero of the discrete decoupled system as well.
  double m2 = 0.0;
  for (int j = 0; j < g.n; ++j) m2 += std::pow(p.z2.v[j], 4);
  m2 *= 0.5 * g.h;
  const double qbar2 = m2 / norm2(p.z2);
  const double sn = std::sqrt(N);
  const double c = std::sqrt(qbar2 * sn / (sn - 1.0));
  std::fill(p.z1.v.begin(), p.z1.v.end(), c);
  return p;
}

// ---------------------------------------------------------------------------
// Newton fronts.
// ---------------------------------------------------------------------------

SolveReport newton_solve(const PairMap& F, const ZPair& z0, const SolveOptions& opt) {
  const PairChart chart = PairChart::make(z0);

  const CoreEval eval = [&](const Eigen::VectorXd& x, EvalOut* out) -> bool {
    try {
      const LoopPair f = F(chart.decode(x));
      out->r = chart.encode_residual(f);
      out->sup = std::max(sup_norm(f.first), sup_norm(f.second));
      return true;
    } catch (const std::runtime_error&) {
      return false;
    }
  };
  const CoreAdmit admit = [&](const Eigen::VectorXd& x) -> bool {
    try {
      return check_admissible(chart.decode(x)).ok();
    } catch (const std::runtime_error&) {
      return false;
    }
  };

  const CoreReport core = newton_core(eval, admit, chart.encode(z0), opt);
  SolveReport rep;
  rep.converged = core.converged;
  rep.iterations = core.iterations;
  rep.final_grad_norm = core.final_sup;
  rep.z = chart.decode(core.x);
  rep.min_singular_value = core.min_sv;
  rep.message = core.message;
  return rep;
}

LoopSolveReport newton_solve_loop(const LoopMap& F, const ZLoop& z0,
                                  const SolveOptions& opt) {
  const ClassBasis basis = class_basis(z0.grid, z0.cls);
  const LoopGrid g = z0.grid;
  const SymmetryClass cls = z0.cls;

  const auto decode = [&](const Eigen::VectorXd& x) {
    ZLoop z = ZLoop::zeros(g, cls);
    basis_expand(basis, x, 0, &z);
    return z;
  };
  const CoreEval eval = [&](const Eigen::VectorXd& x, EvalOut* out) -> bool {
    try {
      const ZLoop f = F(decode(x));
      out->r = basis_coords(basis, f);
      out->sup = sup_norm(f);
      return true;
    } catch (const std::runtime_error&) {
      return false;
    }
  };
  const CoreAdmit admit = [](const Eigen::VectorXd&) { return true; };

  const CoreReport core = newton_core(eval, admit, basis_coords(basis, z0), opt);
  LoopSolveReport rep;
  rep.converged = core.converged;
  rep.iterations = core.iterations;
  rep.final_grad_norm = core.final_sup;
  rep.z = decode(core.x);
  rep.min_singular_value = core.min_sv;
  rep.message = core.message;
  return rep;
}

// ---------------------------------------------------------------------------
// Two-stage continuation.
// ---------------------------------------------------------------------------

ContinuationTrace continue_homotopy(LoopGrid g, int steps_a, int steps_b,
                                    const SolveOptions& opt, double N,
                                    bool run_stage_a, bool run_stage_b,
                                    const ZPair* start, double stage_b_target,
                                    const StepCallback& on_step) {
  ContinuationTrace trace;
  ZPair z = start != nullptr ? *start : decoupled_seed(g, N);

  const auto stalled = [&trace](double at) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "continuation stalled at r=%g", at);
    trace.message = buf;
  };

  // Walks one family from 0 to target with step halving (minimum 1e-4) and
  // doubling back toward the nominal step after each accepted solve.
  const auto walk = [&](const std::string& stage,
                        const std::function<PairMap(double)>& family, int steps,
                        double target, bool solve_at_zero) -> bool {
    if (steps <= 0) return true;
    if (solve_at_zero) {
      const SolveReport rep = newton_solve(family(0.0), z, opt);
      if (!rep.converged) {
        stalled(0.0);
        trace.r = 0.0;
        return false;
      }
      z = rep.z;
      trace.r = 0.0;
      trace.steps.push_back({stage, 0.0, rep.iterations, rep.final_grad_norm});
      if (on_step) on_step(trace.steps.back(), z);
    }
    const double base = target / steps;
    double dr = base;
    double reached = 0.0;
    while (reached < target - 1e-12) {
      const double next = std::min(reached + dr, target);
      const SolveReport rep = newton_solve(family(next), z, opt);
      if (rep.converged) {
        z = rep.z;
        reached = next;
        trace.r = reached;
        trace.steps.push_back({stage, reached, rep.iterations, rep.final_grad_norm});
        if (on_step) on_step(trace.steps.back(), z);
        dr = std::min(base, 2.0 * dr);
      } else {
        dr *= 0.5;
        if (dr < 1e-4) {
          stalled(reached);
          return false;
        }
      }
    }
    return true;
  };

  bool ok = true;
  if (ok && run_stage_a) {
    ok = walk(
        "A",
        [N](double r) {
          return PairMap([r, N](const ZPair& p) { return decoupled_F(p, r, N); });
        },
        steps_a, 1.0, false);
  }
  if (ok && run_stage_b) {
    ok = walk(
        "B",
        [N](double rho) {
          return PairMap(
              [rho, N](const ZPair& p) { return grad_B(p, ModelParams{N, rho}); });
        },
        steps_b, stage_b_target, true);
  }
  trace.z = z;
  trace.completed = ok;
  return trace;
}

// ---------------------------------------------------------------------------
// FD spectrum.
// ---------------------------------------------------------------------------

std::vector<double> hessian_spectrum(const PairMap& F, const ZPair& z, double fd_step) {
  const PairChart chart = PairChart::make(z);
  const Eigen::VectorXd x0 = chart.encode(z);
  const int m = chart.dim();
  Eigen::MatrixXd J(m, m);
  for (int c = 0; c < m; ++c) {
    Eigen::VectorXd xp = x0;
    Eigen::VectorXd xm = x0;
    xp[c] += fd_step;
    xm[c] -= fd_step;
    const Eigen::VectorXd rp = chart.encode_residual(F(chart.decode(xp)));
    const Eigen::VectorXd rm = chart.encode_residual(F(chart.decode(xm)));
    J.col(c) = (rp - rm) / (2.0 * fd_step);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
  std::vector<double> out(svd.singularValues().data(),
                          svd.singularValues().data() + m);
  std::reverse(out.begin(), out.end());
  return out;
}

}  // namespace fpo
