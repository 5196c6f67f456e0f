// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dynsplat/geometry/rotation6d.hpp"

namespace dynsplat {

// Quaternions are stored (w, x, y, z).

inline Vec4 quat_identity() { return {1.0, 0.0, 0.0, 0.0}; }

inline Vec4 quat_mul(const Vec4& a, const Vec4& b) {
  return {a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
          a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
          a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
          a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]};
}

/// Rotation matrix of a unit quaternion.
inline Mat3 quat_to_matrix(const Vec4& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

inline Vec4 quat_from_matrix(const Mat3& r) {
  Vec4 q;
  const double tr = r.trace();
  if (tr > 0.0) {
    double s = std::sqrt(tr + 1.0) * 2.0;
    q = {0.25 * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s,
         (r(1, 0) - r(0, 1)) / s};
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2.0;
    q = {(r(2, 1) - r(1, 2)) / s, 0.25 * s, (r(0, 1) + r(1, 0)) / s,
         (r(0, 2) + r(2, 0)) / s};
  } else if (r(1, 1) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2.0;
    q = {(r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, 0.25 * s,
         (r(1, 2) + r(2, 1)) / s};
  } else {
    double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2.0;
    q = {(r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s,
         (r(1, 2) + r(2, 1)) / s, 0.25 * s};
  }
  return q.normalized();
}

/// Matrix of a possibly non-unit quaternion (normalized internally).
inline Mat3 quat_to_matrix_normalized(const Vec4& q_raw) {
  return quat_to_matrix(q_raw.normalized());
}

/// Reverse-mode derivative of quat_to_matrix_normalized: accumulates
/// dL/dq_raw from dL/dR.
inline void quat_backward(const Vec4& q_raw, const Mat3& dL_dR, Vec4* dL_dq_raw) {
  const double n = q_raw.norm();
  const Vec4 q = q_raw / n;
  const double w = q[0], x = q[1], y = q[2], z = q[3];

  Mat3 dw, dx, dy, dz;
  dw << 0, -z, y, z, 0, -x, -y, x, 0;
  dx << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
  dy << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
  dz << -2 * z, -w, x, w, -2 * z, y, x, y, 0;

  Vec4 g;
  g[0] = 2.0 * (dL_dR.array() * dw.array()).sum();
  g[1] = 2.0 * (dL_dR.array() * dx.array()).sum();
  g[2] = 2.0 * (dL_dR.array() * dy.array()).sum();
  g[3] = 2.0 * (dL_dR.array() * dz.array()).sum();

  // through the normalization
  *dL_dq_raw += (g - q * q.dot(g)) / n;
}

}  // namespace dynsplat
