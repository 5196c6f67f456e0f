// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "dynsplat/core/error.hpp"

namespace dynsplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// Continuous 6D rotation parameterization: the first two columns of a
/// rotation matrix before Gram-Schmidt orthonormalization. This is the
/// representation every optimized rotation uses; fixed rotations are cached
/// as plain matrices.
struct Rot6d {
  Vec3 a1{1.0, 0.0, 0.0};
  Vec3 a2{0.0, 1.0, 0.0};

  static Rot6d identity() { return {}; }

  bool operator==(const Rot6d& o) const { return a1 == o.a1 && a2 == o.a2; }
};

/// Gram-Schmidt orthonormalization of the two 6D columns into a proper
/// rotation matrix (orthonormal, det +1).
inline Mat3 rot6d_to_matrix(const Rot6d& r) {
  constexpr double kTol = 1e-12;
  const double n1 = r.a1.norm();
  if (n1 <= kTol) {
    throw DegenerateRotation("rot6d_to_matrix: first column has near-zero norm");
  }
  const Vec3 b1 = r.a1 / n1;
  const Vec3 u2 = r.a2 - b1.dot(r.a2) * b1;
  const double n2 = u2.norm();
  if (n2 <= kTol) {
    throw DegenerateRotation("rot6d_to_matrix: columns are (near-)parallel");
  }
  const Vec3 b2 = u2 / n2;
  const Vec3 b3 = b1.cross(b2);
  Mat3 m;
  m.col(0) = b1;
  m.col(1) = b2;
  m.col(2) = b3;
  return m;
}

/// Inverse of rot6d_to_matrix on actual rotation matrices: reads off the
/// first two columns.
inline Rot6d matrix_to_rot6d(const Mat3& m) { return {m.col(0), m.col(1)}; }

/// Reverse-mode derivative of rot6d_to_matrix. Given dL/dR (by matrix
/// entries), accumulates dL/da1 and dL/da2.
inline void rot6d_backward(const Rot6d& r, const Mat3& dL_dR, Vec3* dL_da1,
                           Vec3* dL_da2) {
  const double n1 = r.a1.norm();
  const Vec3 b1 = r.a1 / n1;
  const Vec3 u2 = r.a2 - b1.dot(r.a2) * b1;
  const double n2 = u2.norm();
  const Vec3 b2 = u2 / n2;

  Vec3 g1 = dL_dR.col(0);
  Vec3 g2 = dL_dR.col(1);
  const Vec3 g3 = dL_dR.col(2);

  // b3 = b1 x b2
  g1 += b2.cross(g3);
  g2 += g3.cross(b1);

  // b2 = u2 / |u2|
  const Vec3 gu2 = (g2 - b2 * b2.dot(g2)) / n2;

  // u2 = a2 - (b1 . a2) b1
  const double s = b1.dot(r.a2);
  *dL_da2 += gu2 - b1 * b1.dot(gu2);
  g1 += -r.a2 * b1.dot(gu2) - s * gu2;

  // b1 = a1 / |a1|
  *dL_da1 += (g1 - b1 * b1.dot(g1)) / n1;
}

}  // namespace dynsplat
