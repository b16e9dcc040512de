#ifndef TIMELEAK_QUADRATURE_HPP
#define TIMELEAK_QUADRATURE_HPP

#include <cmath>
#include <cstddef>

#include "timeleak/errors.hpp"

namespace timeleak {

namespace detail {

template <class F>
double simpson_adaptive(const F& f, double a, double m, double b, double fa,
                        double fm, double fb, double whole, double tol,
                        int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double err = (left + right - whole) / 15.0;
  if (depth <= 0 || std::abs(err) <= tol) return left + right + err;
  return simpson_adaptive(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_adaptive(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Adaptive Simpson with Richardson correction, absolute tolerance.
// The interval is pre-split into `panels` equal pieces so narrow features
// away from the midpoint are not skipped by the first error estimate.
template <class F>
double integrate_adaptive(const F& f, double a, double b, double abs_tol,
                          std::size_t panels = 16) {
  if (!(std::isfinite(a) && std::isfinite(b)))
    throw ArgumentError("integrate_adaptive: non-finite bounds");
  if (a == b) return 0.0;
  if (panels == 0) panels = 1;
  const double h = (b - a) / static_cast<double>(panels);
  const double panel_tol = abs_tol / static_cast<double>(panels);
  double sum = 0.0;
  double x0 = a;
  double f0 = f(x0);
  for (std::size_t i = 0; i < panels; ++i) {
    const double x1 = (i + 1 == panels) ? b : a + h * static_cast<double>(i + 1);
    const double xm = 0.5 * (x0 + x1);
    const double fm = f(xm);
    const double f1 = f(x1);
    const double whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
    sum += detail::simpson_adaptive(f, x0, xm, x1, f0, fm, f1, whole,
                                    panel_tol, 48);
    x0 = x1;
    f0 = f1;
  }
  return sum;
}

}  // namespace timeleak

#endif
