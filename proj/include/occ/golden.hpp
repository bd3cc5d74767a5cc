#pragma once

#include <cmath>
#include <utility>

namespace occ {

struct LineMax {
  double x = 0.0;
  double value = 0.0;
};

/// Golden-section maximization of a unimodal function on [lo, hi]. The
/// endpoints are also probed so boundary optima are returned exactly.
template <typename F>
LineMax golden_maximize(F&& fn, double lo, double hi, double tol = 1e-10, int max_iter = 200) {
  if (!(hi > lo)) return {lo, fn(lo)};
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = fn(c), fd = fn(d);
  for (int i = 0; i < max_iter && (b - a) > tol; ++i) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = fn(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = fn(d);
    }
  }
  LineMax best = fc >= fd ? LineMax{c, fc} : LineMax{d, fd};
  const double mid = 0.5 * (a + b);
  if (const double fm = fn(mid); fm > best.value) best = {mid, fm};
  if (const double fl = fn(lo); fl >= best.value) best = {lo, fl};
  if (const double fh = fn(hi); fh > best.value) best = {hi, fh};
  return best;
}

}  // namespace occ
