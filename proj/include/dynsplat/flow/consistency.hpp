// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

#include "dynsplat/core/error.hpp"
#include "dynsplat/geometry/camera.hpp"
#include "dynsplat/image/rasters.hpp"

namespace dynsplat {

/// Parameters of the forward-backward occlusion criterion
/// ||f_fwd + f_bwd o (id + f_fwd)||^2 < alpha * (||f_fwd||^2 + ||f_bwd||^2) + beta.
struct ConsistencyParams {
  double alpha = 0.01;   // unitless
  double beta = 0.5;     // pixels^2
};

/// Bilinear sample of a flow field at continuous p. Any NaN neighbor makes
/// the result NaN; p outside the image is an error.
inline Vec2 sample_flow(const FlowMap& f, const Pixel& p) {
  if (!in_image(f.width, f.height, p.x(), p.y())) {
    throw OutOfBounds("sample_flow: pixel outside image bounds");
  }
  int x0 = static_cast<int>(std::floor(p.x()));
  int y0 = static_cast<int>(std::floor(p.y()));
  x0 = std::min(x0, f.width - 2 >= 0 ? f.width - 2 : 0);
  y0 = std::min(y0, f.height - 2 >= 0 ? f.height - 2 : 0);
  const int x1 = std::min(x0 + 1, f.width - 1);
  const int y1 = std::min(y0 + 1, f.height - 1);
  const double fx = p.x() - x0;
  const double fy = p.y() - y0;
  Vec2 out;
  for (int c = 0; c < 2; ++c) {
    const double v00 = c == 0 ? f.du(x0, y0) : f.dv(x0, y0);
    const double v10 = c == 0 ? f.du(x1, y0) : f.dv(x1, y0);
    const double v01 = c == 0 ? f.du(x0, y1) : f.dv(x0, y1);
    const double v11 = c == 0 ? f.du(x1, y1) : f.dv(x1, y1);
    out[c] = (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) +
             fy * ((1.0 - fx) * v01 + fx * v11);
  }
  return out;
}

/// Tracked position p + f(p). May land out of bounds; callers filter.
inline Pixel track(const Pixel& p0, const FlowMap& f_fwd) {
  const int x = static_cast<int>(std::lround(p0.x()));
  const int y = static_cast<int>(std::lround(p0.y()));
  if (!in_image(f_fwd.width, f_fwd.height, x, y)) {
    throw OutOfBounds("track: start pixel outside image bounds");
  }
  return {p0.x() + f_fwd.du(x, y), p0.y() + f_fwd.dv(x, y)};
}

/// Binary confidence weights from the forward-backward consistency check.
/// Out-of-bounds or NaN targets get weight 0. The backward weights are the
/// same operation with the flow arguments swapped.
inline ScalarMap forward_backward_weights(const FlowMap& f_fwd,
                                          const FlowMap& f_bwd,
                                          const ConsistencyParams& params = {}) {
  if (f_fwd.width != f_bwd.width || f_fwd.height != f_bwd.height) {
    throw DimensionMismatch("forward_backward_weights: flow dimensions differ");
  }
  ScalarMap w(f_fwd.width, f_fwd.height, 0.0);
  for (int y = 0; y < f_fwd.height; ++y) {
    for (int x = 0; x < f_fwd.width; ++x) {
      const Vec2 f(f_fwd.du(x, y), f_fwd.dv(x, y));
      if (!std::isfinite(f.x()) || !std::isfinite(f.y())) continue;
      const Pixel p1(x + f.x(), y + f.y());
      if (!in_image(f_bwd.width, f_bwd.height, p1.x(), p1.y())) continue;
      const Vec2 b = sample_flow(f_bwd, p1);
      if (!std::isfinite(b.x()) || !std::isfinite(b.y())) continue;
      const double r2 = (f + b).squaredNorm();
      const double bound =
          params.alpha * (f.squaredNorm() + b.squaredNorm()) + params.beta;
      if (r2 < bound) w.at(x, y) = 1.0;
    }
  }
  return w;
}

}  // namespace dynsplat
