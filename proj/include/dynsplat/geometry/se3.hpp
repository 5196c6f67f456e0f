// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include "dynsplat/geometry/rotation6d.hpp"

namespace dynsplat {

using Vec6 = Eigen::Matrix<double, 6, 1>;

inline Mat3 skew(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(),  //
      w.z(), 0.0, -w.x(),   //
      -w.y(), w.x(), 0.0;
  return m;
}

/// Rigid motion. The rotation is stored in the 6D representation so that
/// transforms flowing through optimizers keep one parameterization; the
/// matrix form is recomputed on demand.
struct SE3 {
  Rot6d rotation;
  Vec3 translation{0.0, 0.0, 0.0};

  static SE3 identity() { return {}; }

  static SE3 from_matrix(const Mat3& r, const Vec3& t) {
    return {matrix_to_rot6d(r), t};
  }

  Mat3 rotation_matrix() const { return rot6d_to_matrix(rotation); }

  bool operator==(const SE3& o) const {
    return rotation == o.rotation && translation == o.translation;
  }
};

/// apply(a, p) = R_a p + t_a.
inline Vec3 se3_apply(const SE3& a, const Vec3& p) {
  return a.rotation_matrix() * p + a.translation;
}

/// compose(a, b) applies b first, then a.
inline SE3 se3_compose(const SE3& a, const SE3& b) {
  const Mat3 ra = a.rotation_matrix();
  const Mat3 rb = b.rotation_matrix();
  return SE3::from_matrix(ra * rb, ra * b.translation + a.translation);
}

inline SE3 se3_inverse(const SE3& a) {
  const Mat3 rt = a.rotation_matrix().transpose();
  return SE3::from_matrix(rt, -(rt * a.translation));
}

namespace detail {

/// Rotation angle from a rotation matrix, clamped into [0, pi].
inline double rotation_angle(const Mat3& r) {
  const double c = std::max(-1.0, std::min(1.0, (r.trace() - 1.0) * 0.5));
  return std::acos(c);
}

}  // namespace detail

/// Group exponential: twist (v, w) -> SE3, with v the translational and w the
/// rotational part.
inline SE3 se3_exp(const Vec6& xi) {
  const Vec3 v = xi.head<3>();
  const Vec3 w = xi.tail<3>();
  const double theta = w.norm();
  const Mat3 hat = skew(w);
  const Mat3 hat2 = hat * hat;
  Mat3 r;
  Mat3 big_v;
  if (theta < 1e-9) {
    // 4th-order series; error O(theta^4) is below double rounding here.
    r = Mat3::Identity() + hat + 0.5 * hat2;
    big_v = Mat3::Identity() + 0.5 * hat + hat2 / 6.0;
  } else {
    const double t2 = theta * theta;
    const double s = std::sin(theta);
    const double c = std::cos(theta);
    r = Mat3::Identity() + (s / theta) * hat + ((1.0 - c) / t2) * hat2;
    big_v = Mat3::Identity() + ((1.0 - c) / t2) * hat +
            ((theta - s) / (t2 * theta)) * hat2;
  }
  return SE3::from_matrix(r, big_v * v);
}

/// Group logarithm. Principal branch only; rotations with angle >= pi - 1e-6
/// are rejected (two-frame motions in scope are small, so this fails loudly
/// rather than picking a branch).
inline Vec6 se3_log(const SE3& t) {
  const Mat3 r = t.rotation_matrix();
  const double theta = detail::rotation_angle(r);
  if (theta >= M_PI - 1e-6) {
    throw NearPiRotation("se3_log: rotation angle within 1e-6 of pi");
  }
  Vec3 w;
  if (theta < 1e-9) {
    // w ~ vee(R - R^T)/2 with the O(theta^3) correction folded in.
    w = 0.5 * Vec3(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    w *= 1.0 + theta * theta / 6.0;
  } else {
    w = theta / (2.0 * std::sin(theta)) *
        Vec3(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  }
  const Mat3 hat = skew(w);
  const Mat3 hat2 = hat * hat;
  Mat3 v_inv;
  if (theta < 1e-9) {
    v_inv = Mat3::Identity() - 0.5 * hat + hat2 / 12.0;
  } else {
    const double t2 = theta * theta;
    v_inv = Mat3::Identity() - 0.5 * hat +
            (1.0 / t2 - (1.0 + std::cos(theta)) /
                            (2.0 * theta * std::sin(theta))) *
                hat2;
  }
  Vec6 xi;
  xi.head<3>() = v_inv * t.translation;
  xi.tail<3>() = w;
  return xi;
}

/// Screw (geodesic) interpolation along the one-parameter subgroup of t:
/// exp(ratio * log(t)). interpolate(t, 0) is the exact identity and
/// interpolate(t, 1) recovers t.
inline SE3 se3_interpolate(const SE3& t, double ratio) {
  if (ratio == 0.0) return SE3::identity();
  return se3_exp(ratio * se3_log(t));
}

}  // namespace dynsplat
