#pragma once
// Real trigonometric series on [0,2):
//   f(tau) = a0/2 + sum_{k=1}^{n/2-1} (a_k cos(pi k tau) + b_k sin(pi k tau))
//          + (a_{n/2}/2) cos(pi (n/2) tau)
// fitted by FFT from n uniform samples. Supplies off-grid evaluation, exact
// derivative/antiderivative of the interpolant, and fast resampling.

#include <vector>

namespace fpo {

class TrigSeries {
 public:
  TrigSeries() = default;

  static TrigSeries fit(const std::vector<double>& samples);

  int n() const { return n_; }
  double mean() const { return 0.5 * a_[0]; }

  std::vector<double> samples() const;  // inverse FFT back to the grid

  // O(n) mode sum with incremental angle recurrence.
  double eval(double tau) const;

  // Derivative of the interpolant (Nyquist cosine dropped: its derivative is
  // a pure Nyquist sine, which vanishes at every node and has no slot in the
  // n-point basis).
  TrigSeries derivative() const;

  // Second derivative of the interpolant. Unlike derivative() twice, this
  // keeps the Nyquist cosine: its second derivative is again a Nyquist
  // cosine, exactly representable, and dropping it would make the top mode
  // invisible to any operator built from d².
  TrigSeries second_derivative() const;

  // Copy with coefficients below rel_tol * max|coefficient| zeroed. Used
  // before repeated differentiation, where the (pi k)^p amplification would
  // otherwise promote high-mode rounding noise above the result.
  TrigSeries thresholded(double rel_tol) const;

  // Copy with a raised-cosine roll-off applied to modes above
  // start_frac * (n/2): weight 1 up to the start, cos^2 down to 0 at the
  // Nyquist mode. The top modes of a fitted series hold the part of the
  // signal the grid resolves worst; rolling them off trades a value change
  // on the order of their (tiny) amplitudes for the removal of their
  // (pi k)^2-amplified contribution to derivatives.
  TrigSeries lowpass(double start_frac) const;

  // F(tau) = int_0^tau f: linear-plus-periodic, evaluated in closed form.
  double eval_antideriv(double tau) const;

  const std::vector<double>& cos_coeffs() const { return a_; }
  const std::vector<double>& sin_coeffs() const { return b_; }

 private:
  int n_ = 0;
  std::vector<double> a_, b_;  // size n/2+1; b_[0] = b_[n/2] = 0
};

}  // namespace fpo
