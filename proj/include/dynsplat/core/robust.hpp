// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

namespace dynsplat {

/// Smoothed L1 ("smooth L1"): r^2/(2*delta) inside |r| <= delta, |r| - delta/2
/// outside. Matches |r| asymptotically, so reported L1 losses and optimized
/// losses agree away from zero.
inline double smooth_l1(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * r * r / delta : a - 0.5 * delta;
}

/// d smooth_l1 / d r.
inline double smooth_l1_grad(double r, double delta) {
  return std::abs(r) <= delta ? r / delta : (r > 0.0 ? 1.0 : -1.0);
}

/// Classic Huber: r^2/2 inside |r| <= delta, delta*(|r| - delta/2) outside.
inline double huber(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

inline double huber_grad(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? r : (r > 0.0 ? delta : -delta);
}

}  // namespace dynsplat
