#pragma once
// Uniform periodic grid on the parameter interval [0,2) and loops sampled on it.
//
// Loops come in five symmetry classes built from two commuting involutions:
//   shift    S z(tau) = eps * z(tau+1)   (eps = +1 "periodic", -1 "antiperiodic")
//   reflect  R z(tau) = eps'* z(-tau)
// The "symmetric" classes fix both involutions; the plain twisted classes fix
// only the shift; Plain fixes nothing.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace fpo {

struct LoopGrid {
  int n = 0;       // sample count over [0,2); must be divisible by 4
  double h = 0.0;  // spacing 2/n

  static LoopGrid make(int n);
  double tau(int j) const { return h * j; }
  bool operator==(const LoopGrid&) const = default;
};

enum class SymmetryClass {
  Plain,                  // no constraint
  Periodic1,              // z(tau+1) =  z(tau)
  Antiperiodic,           // z(tau+1) = -z(tau)
  SymmetricPeriodic1,     // 1-periodic and even about tau = 0
  SymmetricAntiperiodic,  // antiperiodic and odd about tau = 0
};

std::string to_string(SymmetryClass c);
SymmetryClass symmetry_class_from_string(const std::string& s);

struct ZLoop {
  LoopGrid grid;
  SymmetryClass cls = SymmetryClass::Plain;
  std::vector<double> v;  // samples at tau_j = j*h

  static ZLoop zeros(LoopGrid g, SymmetryClass c);
  double& operator[](int j) { return v[j]; }
  double operator[](int j) const { return v[j]; }
  int n() const { return grid.n; }
};

// Trapezoid inner product (h/2) * sum_j u_j v_j; the exact quadrature for
// band-limited integrands, normalized so constants pair to their product.
double inner(const ZLoop& u, const ZLoop& w);
double norm2(const ZLoop& z);         // inner(z, z)
double sup_norm(const ZLoop& z);

// Spectral derivative: differentiate the trigonometric interpolant.
// Class map: even-about-0 inputs lose the reflection symmetry label.
ZLoop derivative(const ZLoop& z);

// L2-orthogonal projection onto the target class (group average over the
// involutions above); idempotent, and exact on the grid since all index maps
// are integral.
ZLoop project_symmetry(const ZLoop& z, SymmetryClass target);

// Band-limited random loop in the given class: independent N(0, scale/k^2)
// coefficients on the class basis up to mode kmax.
ZLoop random_loop(LoopGrid g, SymmetryClass cls, std::mt19937_64& rng, int kmax,
                  double scale);

// Orthonormal Fourier basis of a symmetry class on the grid. Columns are
// sampled cos/sin modes restricted to the class, unit-normalized in the inner
// product above; k[c] records the wavenumber of column c (frequency pi*k).
struct ClassBasis {
  std::vector<std::vector<double>> cols;
  std::vector<int> k;
  int size() const { return static_cast<int>(cols.size()); }
};
ClassBasis class_basis(LoopGrid g, SymmetryClass cls);

// Elementwise helpers.
ZLoop operator+(const ZLoop& a, const ZLoop& b);
ZLoop operator-(const ZLoop& a, const ZLoop& b);
ZLoop operator*(double s, const ZLoop& a);
ZLoop pointwise(const ZLoop& a, const ZLoop& b);  // samples multiplied

}  // namespace fpo
