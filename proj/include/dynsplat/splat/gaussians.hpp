// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "dynsplat/core/error.hpp"
#include "dynsplat/geometry/camera.hpp"
#include "dynsplat/geometry/quaternion.hpp"
#include "dynsplat/geometry/se3.hpp"
#include "dynsplat/image/rasters.hpp"

namespace dynsplat {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// Columnar store of 3D Gaussians. Positions are world frame; shape
/// rotations are unit quaternions (re-normalized after each optimizer step);
/// scales and opacity live in log/logit space so the constraints s > 0 and
/// alpha in (0,1) hold by construction. Colors are degree-0 SH (plain RGB).
struct GaussianSet {
  std::vector<Vec3> positions;
  std::vector<Vec4> shape_rot;
  std::vector<Vec3> log_scales;
  std::vector<double> logit_opacity;
  std::vector<Vec3> color;
  std::vector<int> region_id;

  std::size_t size() const { return positions.size(); }

  void append(const Vec3& pos, const Vec4& rot, const Vec3& ls, double lo,
              const Vec3& c, int region) {
    positions.push_back(pos);
    shape_rot.push_back(rot);
    log_scales.push_back(ls);
    logit_opacity.push_back(lo);
    color.push_back(c);
    region_id.push_back(region);
  }

  void append_all(const GaussianSet& other) {
    positions.insert(positions.end(), other.positions.begin(), other.positions.end());
    shape_rot.insert(shape_rot.end(), other.shape_rot.begin(), other.shape_rot.end());
    log_scales.insert(log_scales.end(), other.log_scales.begin(), other.log_scales.end());
    logit_opacity.insert(logit_opacity.end(), other.logit_opacity.begin(),
                         other.logit_opacity.end());
    color.insert(color.end(), other.color.begin(), other.color.end());
    region_id.insert(region_id.end(), other.region_id.begin(), other.region_id.end());
  }
};

/// One Gaussian per valid pixel on the stride grid: world position from the
/// unprojected depth, pixel color, opacity 0.7, isotropic scale covering one
/// source pixel's footprint, identity shape rotation, region from labels.
/// `view` is the world-to-camera transform of the source frame.
inline GaussianSet init_gaussians(const RgbImage& image, const ScalarMap& depth,
                                  const LabelMap& labels, const CameraIntrinsics& k,
                                  const SE3& view, int stride = 1) {
  if (image.width != depth.width || image.height != depth.height ||
      labels.width != depth.width || labels.height != depth.height) {
    throw DimensionMismatch("init_gaussians: raster dimensions differ");
  }
  if (stride < 1) stride = 1;
  GaussianSet g;
  const SE3 cam_to_world = se3_inverse(view);
  const Mat3 r = cam_to_world.rotation_matrix();
  const double footprint = std::max(1.0 / k.fx, 1.0 / k.fy) * stride;
  const double opacity0 = logit(0.7);
  for (int y = 0; y < image.height; y += stride) {
    for (int x = 0; x < image.width; x += stride) {
      const double d = depth.at(x, y);
      if (!std::isfinite(d) || d <= 0.0) continue;
      const Vec3 pc = unproject(k, Pixel(x, y), d);
      const Vec3 pw = r * pc + cam_to_world.translation;
      Vec3 c(image.at(x, y, 0), image.at(x, y, 1), image.at(x, y, 2));
      c = c.cwiseMax(0.0).cwiseMin(1.0);
      const double scale = d * footprint;
      g.append(pw, quat_identity(), Vec3::Constant(std::log(scale)), opacity0, c,
               labels.at(x, y));
    }
  }
  if (g.size() == 0) {
    throw NoValidPixels("init_gaussians: no pixel had valid depth");
  }
  return g;
}

}  // namespace dynsplat
