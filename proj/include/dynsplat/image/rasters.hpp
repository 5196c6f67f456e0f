// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "dynsplat/core/error.hpp"

namespace dynsplat {

/// Dense single-channel raster, row-major. Depth maps are strictly positive
/// where valid; NaN marks invalid pixels. Confidence maps live in [0, 1].
struct ScalarMap {
  int width = 0, height = 0;
  std::vector<double> data;

  ScalarMap() = default;
  ScalarMap(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return data.size(); }
};

/// Dense 2-channel flow raster, row-major interleaved (du, dv) in pixels.
struct FlowMap {
  int width = 0, height = 0;
  std::vector<double> data;  // 2 * width * height

  FlowMap() = default;
  FlowMap(int w, int h, double du = 0.0, double dv = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h * 2) {
    for (std::size_t i = 0; i < data.size(); i += 2) {
      data[i] = du;
      data[i + 1] = dv;
    }
  }

  double& du(int x, int y) { return data[2 * (static_cast<std::size_t>(y) * width + x)]; }
  double& dv(int x, int y) { return data[2 * (static_cast<std::size_t>(y) * width + x) + 1]; }
  double du(int x, int y) const { return data[2 * (static_cast<std::size_t>(y) * width + x)]; }
  double dv(int x, int y) const { return data[2 * (static_cast<std::size_t>(y) * width + x) + 1]; }
};

/// Region id raster. 0 is the static background; ids form a contiguous set
/// {0..n} after manifest loading.
struct LabelMap {
  int width = 0, height = 0;
  std::vector<int> data;

  LabelMap() = default;
  LabelMap(int w, int h, int fill = 0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  int& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  int at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

  int num_regions() const {
    int m = -1;
    for (int v : data) m = std::max(m, v);
    return m + 1;
  }
};

/// RGB raster with channel values in [0, 1] (clamped on load; the renderer
/// may transiently produce values slightly outside during optimization).
struct RgbImage {
  int width = 0, height = 0;
  std::vector<double> data;  // 3 * width * height, interleaved

  RgbImage() = default;
  RgbImage(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

  double& at(int x, int y, int c) {
    return data[3 * (static_cast<std::size_t>(y) * width + x) + c];
  }
  double at(int x, int y, int c) const {
    return data[3 * (static_cast<std::size_t>(y) * width + x) + c];
  }
};

inline bool in_image(int width, int height, double u, double v) {
  return u >= 0.0 && v >= 0.0 && u <= width - 1.0 && v <= height - 1.0;
}

/// Bilinear sample of a scalar map at continuous (u, v). Any NaN neighbor
/// makes the result NaN. Caller guarantees bounds.
inline double sample_bilinear(const ScalarMap& m, double u, double v) {
  int x0 = static_cast<int>(std::floor(u));
  int y0 = static_cast<int>(std::floor(v));
  x0 = std::min(std::max(x0, 0), m.width - 2 >= 0 ? m.width - 2 : 0);
  y0 = std::min(std::max(y0, 0), m.height - 2 >= 0 ? m.height - 2 : 0);
  const int x1 = std::min(x0 + 1, m.width - 1);
  const int y1 = std::min(y0 + 1, m.height - 1);
  const double fx = u - x0;
  const double fy = v - y0;
  const double v00 = m.at(x0, y0), v10 = m.at(x1, y0);
  const double v01 = m.at(x0, y1), v11 = m.at(x1, y1);
  return (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) +
         fy * ((1.0 - fx) * v01 + fx * v11);
}

}  // namespace dynsplat
