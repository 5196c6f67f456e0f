// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "dynsplat/core/robust.hpp"
#include "dynsplat/geometry/quaternion.hpp"
#include "dynsplat/geometry/se3.hpp"
#include "dynsplat/splat/gaussians.hpp"

namespace dynsplat {

/// Per-Gaussian SE(3) motion field (t0 -> t1, world frame). Indexing is
/// parallel to the owning GaussianSet; region_id is mirrored for convenience.
/// Static-region entries are identity and stay identity (the camera pose
/// carries all apparent background motion).
struct MotionField {
  std::vector<Rot6d> rot6;
  std::vector<Vec3> trans;
  std::vector<int> region_id;

  std::size_t size() const { return trans.size(); }

  SE3 transform(std::size_t i) const { return SE3{rot6[i], trans[i]}; }

  static MotionField identity_for(const GaussianSet& g) {
    MotionField f;
    f.rot6.assign(g.size(), Rot6d::identity());
    f.trans.assign(g.size(), Vec3::Zero());
    f.region_id = g.region_id;
    return f;
  }
};

/// Field initialization from the object-level motions: entry i gets the
/// world-frame motion of its region; static entries are identity.
/// `t_obj[r-1]` is the motion of dynamic region r.
inline MotionField init_field(const GaussianSet& g, const std::vector<SE3>& t_obj) {
  MotionField f;
  f.rot6.reserve(g.size());
  f.trans.reserve(g.size());
  f.region_id = g.region_id;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const int region = g.region_id[i];
    if (region == 0) {
      f.rot6.push_back(Rot6d::identity());
      f.trans.push_back(Vec3::Zero());
      continue;
    }
    if (region < 0 || region > static_cast<int>(t_obj.size())) {
      throw UnknownRegion("init_field: gaussian region " + std::to_string(region) +
                          " has no object motion");
    }
    const SE3& t = t_obj[region - 1];
    f.rot6.push_back(t.rotation);
    f.trans.push_back(t.translation);
  }
  return f;
}

/// Moves every Gaussian along the screw path of its field transform:
/// positions by the interpolated motion, shape rotations composed with its
/// rotation part. ratio 0 is the exact identity; ratio 1 the full motion.
inline GaussianSet apply_field(const GaussianSet& g, const MotionField& field,
                               double ratio) {
  if (field.size() != g.size()) {
    throw DimensionMismatch("apply_field: field size does not match gaussians");
  }
  GaussianSet out = g;
  if (ratio == 0.0) return out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const SE3 a = se3_interpolate(field.transform(i), ratio);
    const Mat3 ra = a.rotation_matrix();
    out.positions[i] = ra * g.positions[i] + a.translation;
    out.shape_rot[i] = quat_mul(quat_from_matrix(ra), g.shape_rot[i]);
  }
  return out;
}

struct FieldRegGrads {
  std::vector<Vec3> d_a1, d_a2, d_trans;
};

/// Motion-coherence regularizer: within each dynamic region, Huber penalties
/// on deviations of translations from the region mean and of normalized 6D
/// rotations from their region mean. The static background is excluded.
inline double field_regularization(const MotionField& field, double lambda_t,
                                   double lambda_r, double delta,
                                   FieldRegGrads* grads = nullptr) {
  const std::size_t n = field.size();
  if (grads) {
    grads->d_a1.assign(n, Vec3::Zero());
    grads->d_a2.assign(n, Vec3::Zero());
    grads->d_trans.assign(n, Vec3::Zero());
  }
  int num_regions = 0;
  for (int r : field.region_id) num_regions = std::max(num_regions, r + 1);

  using Vec6d = Eigen::Matrix<double, 6, 1>;
  double total = 0.0;
  for (int region = 1; region < num_regions; ++region) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i) {
      if (field.region_id[i] == region) members.push_back(i);
    }
    if (members.empty()) continue;
    const double inv_m = 1.0 / static_cast<double>(members.size());

    // normalized 6D rotations: the orthonormalized first two columns
    std::vector<Vec6d> nrot(members.size());
    Vec6d mean_rot = Vec6d::Zero();
    Vec3 mean_t = Vec3::Zero();
    for (std::size_t j = 0; j < members.size(); ++j) {
      const std::size_t i = members[j];
      const Mat3 r = rot6d_to_matrix(field.rot6[i]);
      nrot[j] << r.col(0), r.col(1);
      mean_rot += nrot[j];
      mean_t += field.trans[i];
    }
    mean_rot *= inv_m;
    mean_t *= inv_m;

    // Huber of the deviation norms; the means depend on the parameters, so
    // the mean's pullback is distributed back over the members.
    Vec3 sum_dt = Vec3::Zero();
    Vec6d sum_dr = Vec6d::Zero();
    for (std::size_t j = 0; j < members.size(); ++j) {
      const std::size_t i = members[j];
      const Vec3 dt = field.trans[i] - mean_t;
      const double nt = dt.norm();
      total += lambda_t * huber(nt, delta);
      const Vec6d dr = nrot[j] - mean_rot;
      const double nr = dr.norm();
      total += lambda_r * huber(nr, delta);
      if (grads) {
        if (nt > 1e-15) {
          const Vec3 gt = lambda_t * huber_grad(nt, delta) * dt / nt;
          grads->d_trans[i] += gt;
          sum_dt += gt;
        }
        if (nr > 1e-15) {
          const Vec6d gr = lambda_r * huber_grad(nr, delta) * dr / nr;
          Mat3 dl_dr = Mat3::Zero();
          dl_dr.col(0) = gr.head<3>();
          dl_dr.col(1) = gr.tail<3>();
          rot6d_backward(field.rot6[i], dl_dr, &grads->d_a1[i], &grads->d_a2[i]);
          sum_dr += gr;
        }
      }
    }
    if (grads) {
      const Vec3 mean_pullback_t = -inv_m * sum_dt;
      Mat3 dl_dr_mean = Mat3::Zero();
      dl_dr_mean.col(0) = -inv_m * sum_dr.head<3>();
      dl_dr_mean.col(1) = -inv_m * sum_dr.tail<3>();
      for (std::size_t j = 0; j < members.size(); ++j) {
        const std::size_t i = members[j];
        grads->d_trans[i] += mean_pullback_t;
        rot6d_backward(field.rot6[i], dl_dr_mean, &grads->d_a1[i], &grads->d_a2[i]);
      }
    }
  }
  return total;
}

}  // namespace dynsplat
