#pragma once
// Variational functionals for the symmetric two-electron helium model in the
// Levi-Civita chart, and their exact L2 gradients on the parameter grid.
//
//   Q(z)   = 2||z||^2 ||z'||^2 + N/||z||^2          (regularized Kepler action)
//   A(pair) = -||z1||^2 ||z2||^2 / D,  D = ||z1^2||^2 ||z2||^2 - ||z2^2||^2 ||z1||^2
//            (mean-field electron-electron term)
//   I(pair) = mean of 1/(q2 - q1) along the orbit (instantaneous term;
//            negative on ordered pairs), evaluated in the frame where the
//            integrand is smooth
//   B_r    = Q(z1) + Q(z2) + r*I + (1-r)*A
//
// Gradients are with respect to the (h/2)*sum inner product, so critical
// points of the discrete functionals solve grad == 0 pointwise on the grid.

#include <array>
#include <utility>

#include "fpo/grid.hpp"
#include "fpo/levi_civita.hpp"

namespace fpo {

struct ZPair {
  ZLoop z1, z2;
};

struct ModelParams {
  double N = 2.0;  // nuclear charge in the Kepler terms
  double r = 0.0;  // interaction blend: 0 = mean-field, 1 = instantaneous
};

using LoopPair = std::pair<ZLoop, ZLoop>;

// Admissibility of a pair for the blended functionals: z1 bounded away from 0,
// z2 vanishing only transversally, outer electron outside the inner one
// (z1^2 > q2 along the orbit), and D > 0 for the mean-field term.
struct Admissibility {
  bool z1_nonvanishing = false;
  bool ordered = false;       // z1^2 - (z2 in z1-frame)^2 > 0 along the loop
  bool mean_domain = false;   // D > 0
  bool ok() const { return z1_nonvanishing && ordered && mean_domain; }
};
Admissibility check_admissible(const ZPair& p);

double eval_Q(const ZLoop& z, double N);
ZLoop grad_Q(const ZLoop& z, double N);

double eval_A(const ZPair& p);
LoopPair grad_A(const ZPair& p);

double eval_I(const ZPair& p);
LoopPair grad_I(const ZPair& p);

double eval_B(const ZPair& p, const ModelParams& m);
LoopPair grad_B(const ZPair& p, const ModelParams& m);

// Directional derivative of B_r along (v1, v2), computed by differentiating
// the discrete evaluation chain exactly (including both fitted time changes).
// Analytically equal to pairing the grad_B arrays; numerically it matches a
// central difference of eval_B down to the FD roundoff floor, which the
// trapezoid pairing of the arrays does at collision cusps only up to the
// cusp quadrature error.
double dirderiv_B(const ZPair& p, const ZLoop& v1, const ZLoop& v2, const ModelParams& m);
double dirderiv_Q(const ZLoop& z, const ZLoop& v, double N);
double dirderiv_A(const ZPair& p, const ZLoop& v1, const ZLoop& v2);
double dirderiv_I(const ZPair& p, const ZLoop& v1, const ZLoop& v2);

// Decoupled continuation family: cubic ODE residuals (F1, F2^r) whose zeros
// at r=1 are critical points of B_av restricted to the symmetric classes:
//   F1   = -z1'' + a1 z1 + b1 z1^3
//   F2^r = -z2'' + a2(r) z2 + b2(r) z2^3
// with coefficients depending on the pair through norms only.
LoopPair decoupled_F(const ZPair& p, double r, double N = 2.0);

// Legendre transform to the Hamiltonian picture: eta = 4 ||z||^2 z'.
ZLoop legendre(const ZLoop& z);

struct Momentum {
  ZLoop eta1, eta2;
};

// H_r(z, eta) = sum_i ( ||eta_i||^2 / (8||z_i||^2) - N/||z_i||^2 )
//               - [ r*I + (1-r)*A ]   (so <eta, z'> - H = B at eta = legendre(z)).
double eval_H(const ZPair& p, const Momentum& mom, const ModelParams& m);

// First-order residual of Hamilton's equations at (z, eta):
//   res_z   = z'  - dH/deta
//   res_eta = eta' + dH/dz
// At eta = legendre(z) the second component equals -grad B_r.
std::pair<LoopPair, LoopPair> hamilton_residual(const ZPair& p, const Momentum& mom,
                                                const ModelParams& m);

}  // namespace fpo
