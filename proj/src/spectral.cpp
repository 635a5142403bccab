#include "fpo/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace fpo {
namespace {

constexpr double kPi = std::numbers::pi;

// FFTW plan creation is not thread safe; execution on caller-owned arrays is.
struct PlanPair {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
};

PlanPair& plans_for(int n) {
  static std::map<int, PlanPair> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  PlanPair p;
  std::vector<double> re(n);
  std::vector<fftw_complex> cx(n / 2 + 1);
  p.r2c = fftw_plan_dft_r2c_1d(n, re.data(), cx.data(), FFTW_ESTIMATE);
  p.c2r = fftw_plan_dft_c2r_1d(n, cx.data(), re.data(), FFTW_ESTIMATE);
  return cache.emplace(n, p).first->second;
}

}  // namespace

TrigSeries TrigSeries::fit(const std::vector<double>& samples) {
  const int n = static_cast<int>(samples.size());
  if (n < 4 || n % 2 != 0) throw std::invalid_argument("TrigSeries: n must be even and >= 4");
  TrigSeries s;
  s.n_ = n;
  s.a_.assign(n / 2 + 1, 0.0);
  s.b_.assign(n / 2 + 1, 0.0);
  std::vector<double> re(samples);
  std::vector<fftw_complex> cx(n / 2 + 1);
  fftw_execute_dft_r2c(plans_for(n).r2c, re.data(), cx.data());
  const double scale = 2.0 / n;
  for (int k = 0; k <= n / 2; ++k) {
    s.a_[k] = scale * cx[k][0];
    s.b_[k] = -scale * cx[k][1];
  }
  s.b_[0] = 0.0;
  s.b_[n / 2] = 0.0;
  return s;
}

std::vector<double> TrigSeries::samples() const {
  std::vector<fftw_complex> cx(n_ / 2 + 1);
  const double half_n = n_ / 2.0;
  for (int k = 0; k <= n_ / 2; ++k) {
    cx[k][0] = half_n * a_[k];
    cx[k][1] = -half_n * b_[k];
  }
  std::vector<double> out(n_);
  fftw_execute_dft_c2r(plans_for(n_).c2r, cx.data(), out.data());
  for (double& x : out) x /= n_;
  return out;
}

double TrigSeries::eval(double tau) const {
  const double c1 = std::cos(kPi * tau);
  const double s1 = std::sin(kPi * tau);
  double ck = 1.0, sk = 0.0;  // cos/sin of pi*k*tau, starting at k=0
  double acc = 0.5 * a_[0];
  const int half = n_ / 2;
  for (int k = 1; k <= half; ++k) {
    const double cn = ck * c1 - sk * s1;
    const double sn = sk * c1 + ck * s1;
    ck = cn;
    sk = sn;
    const double ak = (k == half) ? 0.5 * a_[k] : a_[k];
    acc += ak * ck + b_[k] * sk;
  }
  return acc;
}

TrigSeries TrigSeries::derivative() const {
  TrigSeries d;
  d.n_ = n_;
  d.a_.assign(n_ / 2 + 1, 0.0);
  d.b_.assign(n_ / 2 + 1, 0.0);
  for (int k = 1; k < n_ / 2; ++k) {
    d.a_[k] = kPi * k * b_[k];
    d.b_[k] = -kPi * k * a_[k];
  }
  return d;
}

TrigSeries TrigSeries::second_derivative() const {
  TrigSeries d;
  d.n_ = n_;
  d.a_.assign(n_ / 2 + 1, 0.0);
  d.b_.assign(n_ / 2 + 1, 0.0);
  for (int k = 1; k <= n_ / 2; ++k) {
    const double w = -(kPi * k) * (kPi * k);
    d.a_[k] = w * a_[k];
    d.b_[k] = w * b_[k];
  }
  return d;
}

TrigSeries TrigSeries::thresholded(double rel_tol) const {
  TrigSeries s = *this;
  double m = 0.0;
  for (double x : a_) m = std::max(m, std::abs(x));
  for (double x : b_) m = std::max(m, std::abs(x));
  const double cut = rel_tol * m;
  for (double& x : s.a_)
    if (std::abs(x) < cut) x = 0.0;
  for (double& x : s.b_)
    if (std::abs(x) < cut) x = 0.0;
  return s;
}

TrigSeries TrigSeries::lowpass(double start_frac) const {
  TrigSeries s = *this;
  const int half = n_ / 2;
  const int k0 = static_cast<int>(start_frac * half);
  if (k0 >= half) return s;
  for (int k = k0 + 1; k <= half; ++k) {
    const double x = kPi / 2.0 * double(k - k0) / double(half - k0);
    const double w = std::cos(x) * std::cos(x);
    s.a_[k] *= w;
    if (k < half) s.b_[k] *= w;
  }
  return s;
}

double TrigSeries::eval_antideriv(double tau) const {
  const double c1 = std::cos(kPi * tau);
  const double s1 = std::sin(kPi * tau);
  double ck = 1.0, sk = 0.0;
  double acc = 0.5 * a_[0] * tau;
  const int half = n_ / 2;
  for (int k = 1; k <= half; ++k) {
    const double cn = ck * c1 - sk * s1;
    const double sn = sk * c1 + ck * s1;
    ck = cn;
    sk = sn;
    const double ak = (k == half) ? 0.5 * a_[k] : a_[k];
    const double w = kPi * k;
    acc += (ak * sk - b_[k] * (ck - 1.0)) / w;
  }
  return acc;
}

}  // namespace fpo
