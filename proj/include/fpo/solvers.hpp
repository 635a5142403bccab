#pragma once
// Damped Newton on symmetric-subspace coordinates plus the two-stage homotopy
// that carries the analytic decoupled seed to critical points of the blended
// action: stage A walks the decoupled family r: 0 -> 1, stage B walks the
// gradient family rho: 0 -> 1 from the mean-field action to the instantaneous
// one.

#include <functional>
#include <string>
#include <vector>

#include "fpo/functionals.hpp"

namespace fpo {

struct SolveOptions {
  double grad_tol = 1e-9;   // stop when the residual sup-norm drops below this
  int max_iter = 100;
  double damping = 1e-3;    // initial Levenberg parameter
  double fd_step = 1e-6;    // one-sided FD step for Jacobian columns
};

struct SolveReport {
  bool converged = false;
  int iterations = 0;
  double final_grad_norm = 0.0;     // residual sup-norm at the final iterate
  ZPair z;
  double min_singular_value = 0.0;  // of the last Jacobian in the orthonormal
                                    // class basis; 0 if none was formed
  std::string message;
};

using PairMap = std::function<LoopPair(const ZPair&)>;
using LoopMap = std::function<ZLoop(const ZLoop&)>;

// Amplitude zeta*sin(pi tau) with zeta^6 = 2N/pi^2: the circular Kepler
// solution of the single-loop action in the antiperiodic symmetric class.
ZLoop kepler_seed(LoopGrid g, double N);

// Analytic critical point of the r=0 decoupled family: constant outer loop
// paired with the Kepler seed. The outer amplitude solves the algebraic
// criticality condition in closed form.
ZPair decoupled_seed(LoopGrid g, double N);

SolveReport newton_solve(const PairMap& F, const ZPair& z0, const SolveOptions& opt);

// Single-loop variant (used for the pure Kepler problem).
struct LoopSolveReport {
  bool converged = false;
  int iterations = 0;
  double final_grad_norm = 0.0;
  ZLoop z;
  double min_singular_value = 0.0;
  std::string message;
};
LoopSolveReport newton_solve_loop(const LoopMap& F, const ZLoop& z0, const SolveOptions& opt);

struct ContinuationStep {
  std::string stage;  // "A" or "B"
  double r = 0.0;     // family parameter reached by this step
  int iterations = 0;
  double final_grad_norm = 0.0;
};

struct ContinuationTrace {
  std::vector<ContinuationStep> steps;
  bool completed = false;
  std::string message;
  ZPair z;          // last accepted pair
  double r = 0.0;   // last accepted parameter of the final stage
};

// Runs stage A then stage B with natural-parameter continuation and step
// halving (minimum step 1e-4). Throws nothing; a stall is reported in the
// trace with message "continuation stalled at r=<value>". Stage B walks the
// blend parameter from 0 (where the stage-A endpoint is re-polished against
// the exact gradient) up to stage_b_target. on_step, when set, sees every
// accepted step together with the accepted pair.
using StepCallback = std::function<void(const ContinuationStep&, const ZPair&)>;
ContinuationTrace continue_homotopy(LoopGrid g, int steps_a, int steps_b,
                                    const SolveOptions& opt, double N = 2.0,
                                    bool run_stage_a = true, bool run_stage_b = true,
                                    const ZPair* start = nullptr,
                                    double stage_b_target = 1.0,
                                    const StepCallback& on_step = nullptr);

// Singular values of the FD Jacobian of F at z in the orthonormal
// symmetric-subspace basis (central differences). Ascending order.
std::vector<double> hessian_spectrum(const PairMap& F, const ZPair& z, double fd_step);

}  // namespace fpo
