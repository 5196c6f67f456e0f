// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dynsplat/core/error.hpp"
#include "dynsplat/core/rng.hpp"
#include "dynsplat/flow/consistency.hpp"
#include "dynsplat/geometry/camera.hpp"
#include "dynsplat/geometry/se3.hpp"
#include "dynsplat/image/rasters.hpp"

namespace dynsplat {

/// 2D-3D correspondences of one rigid region: frame-0 camera-space points
/// (unprojected with D0) paired with their tracked frame-1 pixels.
struct RegionCorrespondences {
  int region_id = 0;
  std::vector<Point3> points3d;
  std::vector<Pixel> pixels1;
  std::vector<double> weights;
};

struct RansacParams {
  double threshold = 2.0;  // pixels
  int max_iters = 1000;
  int min_inliers = 20;
  std::uint64_t seed = 0;
  // Regions with more valid pixels than this are uniformly subsampled
  // (seeded) for RANSAC only.
  int max_correspondences = 5000;
};

/// Collects, for every pixel of the region with weight 1, valid depth, and an
/// in-bounds track, the unprojected frame-0 point and tracked frame-1 pixel.
inline RegionCorrespondences build_region_correspondences(
    int region_id, const LabelMap& labels, const ScalarMap& d0,
    const FlowMap& f_fwd, const ScalarMap& w_fwd, const CameraIntrinsics& k) {
  RegionCorrespondences out;
  out.region_id = region_id;
  for (int y = 0; y < labels.height; ++y) {
    for (int x = 0; x < labels.width; ++x) {
      if (labels.at(x, y) != region_id) continue;
      if (!(w_fwd.at(x, y) > 0.0)) continue;
      const double d = d0.at(x, y);
      if (!std::isfinite(d) || d <= 0.0) continue;
      const Pixel p1(x + f_fwd.du(x, y), y + f_fwd.dv(x, y));
      if (!in_image(labels.width, labels.height, p1.x(), p1.y())) continue;
      out.points3d.push_back(unproject(k, Pixel(x, y), d));
      out.pixels1.push_back(p1);
      out.weights.push_back(w_fwd.at(x, y));
    }
  }
  if (out.points3d.empty()) {
    throw EmptyRegion("build_region_correspondences: region " +
                      std::to_string(region_id) + " has no valid correspondence");
  }
  return out;
}

namespace detail {

/// DLT estimate of [R|t] from >= 6 2D-3D pairs (normalized image coords),
/// followed by orthogonal projection onto SE(3).
inline SE3 pnp_dlt(const std::vector<Point3>& pts, const std::vector<Pixel>& pix,
                   const CameraIntrinsics& k, const std::vector<int>& idx) {
  const int n = static_cast<int>(idx.size());
  Eigen::MatrixXd a(2 * n, 12);
  for (int i = 0; i < n; ++i) {
    const Point3& p = pts[idx[i]];
    const double x = (pix[idx[i]].x() - k.cx) / k.fx;
    const double y = (pix[idx[i]].y() - k.cy) / k.fy;
    Eigen::RowVector4d ph(p.x(), p.y(), p.z(), 1.0);
    a.row(2 * i).setZero();
    a.row(2 * i).segment<4>(0) = -ph;
    a.row(2 * i).segment<4>(8) = x * ph;
    a.row(2 * i + 1).setZero();
    a.row(2 * i + 1).segment<4>(4) = -ph;
    a.row(2 * i + 1).segment<4>(8) = y * ph;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinV);
  const auto& sing = svd.singularValues();
  // A nullspace of dimension > 1 means the pose is not determined (e.g. all
  // points coplanar).
  if (sing(10) <= 1e-9 * sing(0)) {
    throw DegenerateConfiguration("pnp_solve: rank-deficient DLT system");
  }
  Eigen::Matrix<double, 12, 1> v = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> proj;
  proj.row(0) = v.segment<4>(0);
  proj.row(1) = v.segment<4>(4);
  proj.row(2) = v.segment<4>(8);
  Mat3 m = proj.leftCols<3>();
  if (m.determinant() < 0.0) {
    proj = -proj;
    m = -m;
  }
  Eigen::JacobiSVD<Mat3> msvd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = msvd.matrixU() * msvd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 flip = Mat3::Identity();
    flip(2, 2) = -1.0;
    r = msvd.matrixU() * flip * msvd.matrixV().transpose();
  }
  const double scale = msvd.singularValues().mean();
  if (!(scale > 1e-12)) {
    throw DegenerateConfiguration("pnp_solve: zero-scale DLT solution");
  }
  const Vec3 t = proj.col(3) / scale;
  return SE3::from_matrix(r, t);
}

/// Gauss-Newton refinement of the pixel reprojection objective over a left-
/// multiplied twist increment.
inline SE3 pnp_refine(SE3 pose, const std::vector<Point3>& pts,
                      const std::vector<Pixel>& pix, const CameraIntrinsics& k,
                      const std::vector<int>& idx, int max_iters = 20) {
  for (int it = 0; it < max_iters; ++it) {
    const Mat3 r = pose.rotation_matrix();
    Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
    Vec6 g = Vec6::Zero();
    for (int i : idx) {
      const Vec3 pc = r * pts[i] + pose.translation;
      if (pc.z() <= kMinProjectDepth) continue;
      const double iz = 1.0 / pc.z();
      const Vec2 res(k.fx * pc.x() * iz + k.cx - pix[i].x(),
                     k.fy * pc.y() * iz + k.cy - pix[i].y());
      Eigen::Matrix<double, 2, 3> dpi;
      dpi << k.fx * iz, 0.0, -k.fx * pc.x() * iz * iz,  //
          0.0, k.fy * iz, -k.fy * pc.y() * iz * iz;
      Eigen::Matrix<double, 3, 6> dx;
      dx.leftCols<3>() = Mat3::Identity();
      dx.rightCols<3>() = -skew(pc);
      const Eigen::Matrix<double, 2, 6> jac = dpi * dx;
      h += jac.transpose() * jac;
      g += jac.transpose() * res;
    }
    if (g.norm() < 1e-10) break;
    const Vec6 delta = h.ldlt().solve(-g);
    if (!delta.allFinite()) {
      throw DegenerateConfiguration("pnp_solve: singular normal equations");
    }
    const SE3 inc = se3_exp(delta);
    const Mat3 new_r = inc.rotation_matrix() * r;
    pose = SE3::from_matrix(new_r, inc.rotation_matrix() * pose.translation +
                                       inc.translation);
  }
  return pose;
}

inline double reproj_error(const SE3& pose, const CameraIntrinsics& k,
                           const Point3& p, const Pixel& u, const Mat3& r) {
  const Vec3 pc = r * p + pose.translation;
  if (pc.z() <= kMinProjectDepth) return std::numeric_limits<double>::infinity();
  const Vec2 res(k.fx * pc.x() / pc.z() + k.cx - u.x(),
                 k.fy * pc.y() / pc.z() + k.cy - u.y());
  return res.norm();
}

}  // namespace detail

/// Pose from 2D-3D correspondences: DLT on >= 6 points, then Gauss-Newton
/// refinement of the reprojection objective.
inline SE3 pnp_solve(const RegionCorrespondences& corrs, const CameraIntrinsics& k) {
  const int n = static_cast<int>(corrs.points3d.size());
  if (n < 6) {
    throw DegenerateConfiguration("pnp_solve: needs >= 6 correspondences, got " +
                                  std::to_string(n));
  }
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  SE3 pose = detail::pnp_dlt(corrs.points3d, corrs.pixels1, k, all);
  return detail::pnp_refine(pose, corrs.points3d, corrs.pixels1, k, all);
}

struct RansacResult {
  SE3 transform;
  std::vector<bool> inliers;   // over the full correspondence set
  int inlier_count = 0;
  double mean_residual = 0.0;
};

/// Seeded RANSAC around pnp_solve. Deterministic given the seed: each
/// iteration draws from an RNG stream derived from (seed, iteration), so the
/// result does not depend on evaluation order.
inline RansacResult ransac_pnp(const RegionCorrespondences& corrs,
                               const CameraIntrinsics& k,
                               const RansacParams& params = {}) {
  const int n = static_cast<int>(corrs.points3d.size());
  if (n < params.min_inliers) {
    throw InsufficientInliers("ransac_pnp: only " + std::to_string(n) +
                              " correspondences for min_inliers " +
                              std::to_string(params.min_inliers));
  }
  // Subsample large regions for the RANSAC stage only.
  std::vector<int> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  if (n > params.max_correspondences) {
    Rng rng(seed_combine(params.seed, "ransac_subsample"));
    for (int i = 0; i < params.max_correspondences; ++i) {
      const int j = i + static_cast<int>(rng.uniform_int(n - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(params.max_correspondences);
    std::sort(pool.begin(), pool.end());
  }
  const int m = static_cast<int>(pool.size());

  auto score = [&](const SE3& pose, std::vector<bool>* mask, double* mean_res) {
    const Mat3 r = pose.rotation_matrix();
    int count = 0;
    double sum = 0.0;
    if (mask) mask->assign(n, false);
    for (int i : pool) {
      const double e = detail::reproj_error(pose, k, corrs.points3d[i],
                                            corrs.pixels1[i], r);
      if (e < params.threshold) {
        ++count;
        sum += e;
        if (mask) (*mask)[i] = true;
      }
    }
    *mean_res = count > 0 ? sum / count : std::numeric_limits<double>::infinity();
    return count;
  };

  SE3 best_pose;
  int best_count = -1;
  double best_mean = std::numeric_limits<double>::infinity();
  bool found = false;
  for (int it = 0; it < params.max_iters; ++it) {
    Rng rng(seed_combine(seed_combine(params.seed, "ransac_iter"), it));
    std::vector<int> sample;
    sample.reserve(6);
    while (static_cast<int>(sample.size()) < 6) {
      const int c = pool[rng.uniform_int(m)];
      if (std::find(sample.begin(), sample.end(), c) == sample.end()) {
        sample.push_back(c);
      }
    }
    SE3 pose;
    try {
      pose = detail::pnp_dlt(corrs.points3d, corrs.pixels1, k, sample);
      pose = detail::pnp_refine(pose, corrs.points3d, corrs.pixels1, k, sample, 10);
    } catch (const DegenerateConfiguration&) {
      continue;
    }
    double mean_res = 0.0;
    const int count = score(pose, nullptr, &mean_res);
    // Ties: lower mean inlier residual wins; remaining ties keep the earlier
    // iteration.
    if (count > best_count || (count == best_count && mean_res < best_mean)) {
      best_pose = pose;
      best_count = count;
      best_mean = mean_res;
      found = true;
    }
  }
  if (!found || best_count < params.min_inliers) {
    throw InsufficientInliers("ransac_pnp: best model has " +
                              std::to_string(std::max(best_count, 0)) +
                              " inliers, need " + std::to_string(params.min_inliers));
  }

  // Refit on the consensus set; keep whichever candidate explains more.
  RansacResult result;
  result.transform = best_pose;
  result.inlier_count = score(best_pose, &result.inliers, &result.mean_residual);
  for (int pass = 0; pass < 2; ++pass) {
    std::vector<int> inl;
    for (int i : pool) {
      if (result.inliers[i]) inl.push_back(i);
    }
    if (static_cast<int>(inl.size()) < 6) break;
    SE3 refit;
    try {
      refit = detail::pnp_dlt(corrs.points3d, corrs.pixels1, k, inl);
      refit = detail::pnp_refine(refit, corrs.points3d, corrs.pixels1, k, inl);
    } catch (const DegenerateConfiguration&) {
      break;
    }
    std::vector<bool> mask;
    double mean_res = 0.0;
    const int count = score(refit, &mask, &mean_res);
    if (count > result.inlier_count ||
        (count == result.inlier_count && mean_res < result.mean_residual)) {
      result.transform = refit;
      result.inliers = std::move(mask);
      result.inlier_count = count;
      result.mean_residual = mean_res;
    } else {
      break;
    }
  }
  if (result.inlier_count < params.min_inliers) {
    throw InsufficientInliers("ransac_pnp: refit kept " +
                              std::to_string(result.inlier_count) +
                              " inliers, need " + std::to_string(params.min_inliers));
  }
  return result;
}

}  // namespace dynsplat
