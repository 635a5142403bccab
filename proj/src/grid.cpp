#include "fpo/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fpo/spectral.hpp"

namespace fpo {
namespace {

constexpr double kPi = std::numbers::pi;

// Signs picked up by the two class involutions: shift by 1 and reflection.
void class_signs(SymmetryClass c, bool& use_shift, double& shift_sign, bool& use_reflect,
                 double& reflect_sign) {
  use_shift = use_reflect = false;
  shift_sign = reflect_sign = 1.0;
  switch (c) {
    case SymmetryClass::Plain:
      break;
    case SymmetryClass::Periodic1:
      use_shift = true;
      break;
    case SymmetryClass::Antiperiodic:
      use_shift = true;
      shift_sign = -1.0;
      break;
    case SymmetryClass::SymmetricPeriodic1:
      use_shift = use_reflect = true;
      break;
    case SymmetryClass::SymmetricAntiperiodic:
      use_shift = use_reflect = true;
      shift_sign = reflect_sign = -1.0;
      break;
  }
}

}  // namespace

LoopGrid LoopGrid::make(int n) {
  if (n < 8 || n % 4 != 0) throw std::invalid_argument("LoopGrid: n must be divisible by 4 and >= 8");
  return LoopGrid{n, 2.0 / n};
}

std::string to_string(SymmetryClass c) {
  switch (c) {
    case SymmetryClass::Plain: return "plain";
    case SymmetryClass::Periodic1: return "periodic1";
    case SymmetryClass::Antiperiodic: return "antiperiodic";
    case SymmetryClass::SymmetricPeriodic1: return "symmetric_periodic1";
    case SymmetryClass::SymmetricAntiperiodic: return "symmetric_antiperiodic";
  }
  return "?";
}

SymmetryClass symmetry_class_from_string(const std::string& s) {
  if (s == "plain") return SymmetryClass::Plain;
  if (s == "periodic1") return SymmetryClass::Periodic1;
  if (s == "antiperiodic") return SymmetryClass::Antiperiodic;
  if (s == "symmetric_periodic1") return SymmetryClass::SymmetricPeriodic1;
  if (s == "symmetric_antiperiodic") return SymmetryClass::SymmetricAntiperiodic;
  throw std::invalid_argument("unknown symmetry class: " + s);
}

ZLoop ZLoop::zeros(LoopGrid g, SymmetryClass c) {
  ZLoop z;
  z.grid = g;
  z.cls = c;
  z.v.assign(g.n, 0.0);
  return z;
}

double inner(const ZLoop& u, const ZLoop& w) {
  if (u.grid.n != w.grid.n) throw std::invalid_argument("incompatible grids");
  double s = 0.0;
  for (int j = 0; j < u.grid.n; ++j) s += u.v[j] * w.v[j];
  return 0.5 * u.grid.h * s;
}

double norm2(const ZLoop& z) { return inner(z, z); }

double sup_norm(const ZLoop& z) {
  double m = 0.0;
  for (double x : z.v) m = std::max(m, std::abs(x));
  return m;
}

ZLoop derivative(const ZLoop& z) {
  ZLoop d;
  d.grid = z.grid;
  switch (z.cls) {
    case SymmetryClass::SymmetricPeriodic1: d.cls = SymmetryClass::Periodic1; break;
    case SymmetryClass::SymmetricAntiperiodic: d.cls = SymmetryClass::Antiperiodic; break;
    default: d.cls = z.cls; break;
  }
  d.v = TrigSeries::fit(z.v).derivative().samples();
  return d;
}

ZLoop project_symmetry(const ZLoop& z, SymmetryClass target) {
  bool use_shift, use_reflect;
  double ss, rs;
  class_signs(target, use_shift, ss, use_reflect, rs);
  const int n = z.grid.n;
  ZLoop out = z;
  out.cls = target;
  if (use_shift) {
    std::vector<double> w(n);
    for (int j = 0; j < n; ++j) w[j] = 0.5 * (out.v[j] + ss * out.v[(j + n / 2) % n]);
    out.v = std::move(w);
  }
  if (use_reflect) {
    std::vector<double> w(n);
    for (int j = 0; j < n; ++j) w[j] = 0.5 * (out.v[j] + rs * out.v[(n - j) % n]);
    out.v = std::move(w);
  }
  return out;
}

ZLoop random_loop(LoopGrid g, SymmetryClass cls, std::mt19937_64& rng, int kmax, double scale) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  ZLoop z = ZLoop::zeros(g, cls);
  auto add_mode = [&](double freq, bool use_cos, double amp) {
    for (int j = 0; j < g.n; ++j) {
      const double arg = kPi * freq * g.tau(j);
      z.v[j] += amp * (use_cos ? std::cos(arg) : std::sin(arg));
    }
  };
  switch (cls) {
    case SymmetryClass::Plain:
      z.v[0] += 0.0;
      for (int k = 0; k <= kmax; ++k) {
        const double amp = scale / (1.0 + k * k);
        add_mode(k, true, amp * gauss(rng));
        if (k > 0) add_mode(k, false, amp * gauss(rng));
      }
      break;
    case SymmetryClass::Periodic1:
      for (int k = 0; k <= kmax; ++k) {
        const double amp = scale / (1.0 + k * k);
        add_mode(2 * k, true, amp * gauss(rng));
        if (k > 0) add_mode(2 * k, false, amp * gauss(rng));
      }
      break;
    case SymmetryClass::Antiperiodic:
      for (int k = 0; k <= kmax; ++k) {
        const double amp = scale / (1.0 + k * k);
        add_mode(2 * k + 1, true, amp * gauss(rng));
        add_mode(2 * k + 1, false, amp * gauss(rng));
      }
      break;
    case SymmetryClass::SymmetricPeriodic1:
      for (int k = 0; k <= kmax; ++k) add_mode(2 * k, true, scale / (1.0 + k * k) * gauss(rng));
      break;
    case SymmetryClass::SymmetricAntiperiodic:
      for (int k = 0; k <= kmax; ++k) add_mode(2 * k + 1, false, scale / (1.0 + k * k) * gauss(rng));
      break;
  }
  return z;
}

ClassBasis class_basis(LoopGrid g, SymmetryClass cls) {
  ClassBasis basis;
  const int n = g.n;
  auto push = [&](int k, bool use_cos) {
    // Unit normalization in the (h/2)-weighted inner product: constants and
    // the Nyquist cosine already have norm 1, interior modes need sqrt(2).
    const double amp = (k == 0 || k == n / 2) ? 1.0 : std::sqrt(2.0);
    std::vector<double> col(n);
    for (int j = 0; j < n; ++j) {
      const double arg = kPi * k * g.tau(j);
      col[j] = amp * (use_cos ? std::cos(arg) : std::sin(arg));
    }
    basis.cols.push_back(std::move(col));
    basis.k.push_back(k);
  };
  bool use_shift, use_reflect;
  double ss, rs;
  class_signs(cls, use_shift, ss, use_reflect, rs);
  for (int k = 0; k <= n / 2; ++k) {
    if (use_shift && (ss > 0 ? k % 2 != 0 : k % 2 == 0)) continue;
    const bool cos_ok = !use_reflect || rs > 0;
    const bool sin_ok = (!use_reflect || rs < 0) && k > 0 && k < n / 2;
    if (cos_ok) push(k, true);
    if (sin_ok) push(k, false);
  }
  return basis;
}

ZLoop operator+(const ZLoop& a, const ZLoop& b) {
  ZLoop r = a;
  for (int j = 0; j < r.grid.n; ++j) r.v[j] += b.v[j];
  return r;
}

ZLoop operator-(const ZLoop& a, const ZLoop& b) {
  ZLoop r = a;
  for (int j = 0; j < r.grid.n; ++j) r.v[j] -= b.v[j];
  return r;
}

ZLoop operator*(double s, const ZLoop& a) {
  ZLoop r = a;
  for (double& x : r.v) x *= s;
  return r;
}

ZLoop pointwise(const ZLoop& a, const ZLoop& b) {
  ZLoop r = a;
  for (int j = 0; j < r.grid.n; ++j) r.v[j] *= b.v[j];
  return r;
}

}  // namespace fpo
