#pragma once

#include <cmath>
#include <numbers>
#include <utility>

#include "lrr/common.hpp"

namespace lrr {

inline constexpr double kLogSqrt2Pi = 0.9189385332046727417803297364056;  // log(sqrt(2*pi))

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x - kLogSqrt2Pi);
}

inline double normal_log_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

// log Phi(x), stable over the whole real line.
//
// x >= 0      : log1p(-erfc(x/sqrt2)/2)
// -30 < x < 0 : log(erfc(-x/sqrt2)/2); erfc stays normal down to ~1e-197 here
// x <= -30    : asymptotic tail  Phi(x) = phi(x)/(-x) * (1 - 1/x^2 + 3/x^4 - ...)
//
// The two negative branches agree to ~1e-13 relative at the switch point.
inline double log_normal_cdf(double x) {
  static constexpr double inv_sqrt2 = 0.7071067811865475244008443621048;
  if (x >= 0.0) {
    return std::log1p(-0.5 * std::erfc(x * inv_sqrt2));
  }
  if (x > -30.0) {
    return std::log(0.5 * std::erfc(-x * inv_sqrt2));
  }
  const double x2 = x * x;
  const double series =
      1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2) + 105.0 / (x2 * x2 * x2 * x2);
  return -0.5 * x2 - kLogSqrt2Pi - std::log(-x) + std::log(series);
}

inline double normal_cdf(double x) { return std::exp(log_normal_cdf(x)); }

// Inverse Mills ratio gamma(x) = phi(x)/Phi(x). Finite for all x (grows like
// -x in the left tail); this is the gamma appearing in the skew-normal
// stationarity condition and gradient formulas.
inline double mills_ratio(double x) {
  return std::exp(normal_log_pdf(x) - log_normal_cdf(x));
}

// Golden-section search for the minimizer of a unimodal f on [lo, hi].
template <class F>
double golden_section_minimize(F&& f, double lo, double hi, double tol = 1e-10,
                               int max_iter = 500) {
  if (!(lo < hi)) throw DomainError("golden_section_minimize: need lo < hi");
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < max_iter && (b - a) > tol; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Argmin of f over a log-spaced grid on [lo, hi]; returns (grid value, cell width ratio).
template <class F>
std::pair<double, double> log_grid_argmin(F&& f, double lo, double hi, int points) {
  if (!(lo > 0.0 && hi > lo && points >= 2)) throw DomainError("log_grid_argmin: bad grid");
  const double step = (std::log(hi) - std::log(lo)) / (points - 1);
  double best_x = lo, best_f = f(lo);
  for (int k = 1; k < points; ++k) {
    const double x = std::exp(std::log(lo) + step * k);
    const double fx = f(x);
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
    }
  }
  return {best_x, step};
}

}  // namespace lrr
