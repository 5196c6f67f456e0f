// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "dynsplat/core/rng.hpp"
#include "dynsplat/geometry/se3.hpp"

namespace dynsplat::testutil {

/// Random rotation with angle < max_angle, via a random axis-angle pair.
inline Mat3 random_rotation(Rng& rng, double max_angle = 3.0) {
  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  while (axis.norm() < 1e-6) axis = Vec3(rng.normal(), rng.normal(), rng.normal());
  axis.normalize();
  const double angle = rng.uniform(0.0, max_angle);
  const Mat3 hat = skew(axis * angle);
  return (Mat3::Identity() + std::sin(angle) / angle * hat +
          (1.0 - std::cos(angle)) / (angle * angle) * hat * hat)
      .eval();
}

inline SE3 random_se3(Rng& rng, double max_angle = 3.0, double trans_scale = 1.0) {
  return SE3::from_matrix(random_rotation(rng, max_angle),
                          trans_scale * Vec3(rng.normal(), rng.normal(), rng.normal()));
}

inline double rotation_error_rad(const Mat3& a, const Mat3& b) {
  const double c = std::max(-1.0, std::min(1.0, ((a.transpose() * b).trace() - 1.0) * 0.5));
  return std::acos(c);
}

inline double rotation_error_deg(const SE3& a, const SE3& b) {
  return rotation_error_rad(a.rotation_matrix(), b.rotation_matrix()) * 180.0 / M_PI;
}

/// Scratch directory for file-format tests.
inline std::string temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("dynsplat_test_" + name);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace dynsplat::testutil
