// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dynsplat/core/error.hpp"
#include "dynsplat/geometry/rotation6d.hpp"

namespace dynsplat {

// 3D points in camera or world frame (scene units); pixels are continuous.
using Point3 = Vec3;
using Pixel = Vec2;

struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0;
  double cx = 0.0, cy = 0.0;
  int width = 0, height = 0;

  bool valid() const {
    return fx > 0.0 && fy > 0.0 && width > 0 && height > 0 && cx >= 0.0 &&
           cx < width && cy >= 0.0 && cy < height;
  }
};

constexpr double kMinProjectDepth = 1e-6;

inline Pixel project(const CameraIntrinsics& k, const Point3& p) {
  if (p.z() <= kMinProjectDepth) {
    throw BehindCamera("project: point depth <= 1e-6");
  }
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

/// d * K^-1 * (u, v, 1).
inline Point3 unproject(const CameraIntrinsics& k, const Pixel& p, double d) {
  if (!(d > 0.0)) {
    throw BehindCamera("unproject: depth must be positive");
  }
  return {d * (p.x() - k.cx) / k.fx, d * (p.y() - k.cy) / k.fy, d};
}

/// Unit ray direction through pixel p, scaled so z == 1 (K^-1 p~).
inline Vec3 pixel_ray(const CameraIntrinsics& k, const Pixel& p) {
  return {(p.x() - k.cx) / k.fx, (p.y() - k.cy) / k.fy, 1.0};
}

}  // namespace dynsplat
