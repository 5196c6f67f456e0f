// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "dynsplat/core/parallel.hpp"
#include "dynsplat/field/motion_field.hpp"
#include "dynsplat/geometry/camera.hpp"
#include "dynsplat/geometry/quaternion.hpp"
#include "dynsplat/geometry/se3.hpp"
#include "dynsplat/image/rasters.hpp"
#include "dynsplat/splat/gaussians.hpp"

namespace dynsplat {

struct RenderConfig {
  double near_clip = 0.01;            // scene units
  double alpha_threshold = 1.0 / 255.0;
  double gaussian_extent = 3.0;       // standard deviations
  Vec3 background{0.0, 0.0, 0.0};
  double dssim_weight = 0.2;          // lambda of the image loss

  bool operator==(const RenderConfig& o) const {
    return near_clip == o.near_clip && alpha_threshold == o.alpha_threshold &&
           gaussian_extent == o.gaussian_extent && background == o.background &&
           dssim_weight == o.dssim_weight;
  }
};

/// How per-Gaussian motion enters a render.
///  - kNone: canonical (t0) positions, e.g. the frame-0 render.
///  - kFieldEndpoint: the full field transform (t1); gradients reach the
///    field's 6D rotations and translations directly.
///  - kFieldInterp: screw interpolation exp(ratio * log(T)) with one ratio
///    per dynamic region; gradients reach the ratios. Static region stays
///    at identity.
enum class MotionMode { kNone, kFieldEndpoint, kFieldInterp };

constexpr double kCovarianceDilation = 0.3;  // pixels^2, anti-aliasing floor

/// Camera-plane footprint of one Gaussian under a view transform:
/// 2D mean, dilated 2x2 covariance, and camera-space depth.
struct ProjectedGaussian {
  bool valid = false;
  Vec2 mean2d{0, 0};
  double depth = 0.0;
  double cov_a = 0.0, cov_b = 0.0, cov_c = 0.0;   // 2D covariance entries
  double q11 = 0.0, q12 = 0.0, q22 = 0.0;         // conic (inverse covariance)
  double opacity = 0.0;                           // sigmoid(logit_opacity)
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;           // inclusive pixel bbox
};

namespace detail {

struct GaussianTransform {
  Mat3 r_a = Mat3::Identity();  // motion rotation
  Vec3 t_a = Vec3::Zero();      // motion translation
};

/// Per-mode motion transform of gaussian i.
inline GaussianTransform motion_of(const GaussianSet& g, const MotionField* field,
                                   MotionMode mode,
                                   const std::vector<double>& ratios,
                                   const std::vector<Vec6>* twists, std::size_t i) {
  GaussianTransform out;
  if (mode == MotionMode::kNone) return out;
  if (mode == MotionMode::kFieldEndpoint) {
    out.r_a = rot6d_to_matrix(field->rot6[i]);
    out.t_a = field->trans[i];
    return out;
  }
  const int region = g.region_id[i];
  if (region == 0) return out;  // static background: identity at any ratio
  const SE3 a = se3_exp(ratios[region] * (*twists)[i]);
  out.r_a = a.rotation_matrix();
  out.t_a = a.translation;
  return out;
}

inline ProjectedGaussian project_one(const GaussianSet& g, std::size_t i,
                                     const GaussianTransform& motion, const Mat3& r_c,
                                     const Vec3& t_c, const CameraIntrinsics& k,
                                     const RenderConfig& cfg) {
  ProjectedGaussian p;
  const Vec3 x_m = motion.r_a * g.positions[i] + motion.t_a;
  const Vec3 x_c = r_c * x_m + t_c;
  if (x_c.z() <= cfg.near_clip) return p;  // clipped

  const double iz = 1.0 / x_c.z();
  p.depth = x_c.z();
  p.mean2d = Vec2(k.fx * x_c.x() * iz + k.cx, k.fy * x_c.y() * iz + k.cy);

  const Mat3 r = r_c * motion.r_a;
  const Mat3 r_s = quat_to_matrix_normalized(g.shape_rot[i]);
  const Vec3 s2 = (2.0 * g.log_scales[i]).array().exp();
  const Mat3 sigma_w = r_s * s2.asDiagonal() * r_s.transpose();
  const Mat3 sigma_c = r * sigma_w * r.transpose();
  Eigen::Matrix<double, 2, 3> j;
  j << k.fx * iz, 0.0, -k.fx * x_c.x() * iz * iz,  //
      0.0, k.fy * iz, -k.fy * x_c.y() * iz * iz;
  const Mat2 cov = (j * sigma_c * j.transpose()).eval();
  p.cov_a = cov(0, 0) + kCovarianceDilation;
  p.cov_b = cov(0, 1);
  p.cov_c = cov(1, 1) + kCovarianceDilation;
  const double det = p.cov_a * p.cov_c - p.cov_b * p.cov_b;
  if (!(det > 0.0)) return p;
  p.q11 = p.cov_c / det;
  p.q12 = -p.cov_b / det;
  p.q22 = p.cov_a / det;
  p.opacity = sigmoid(g.logit_opacity[i]);

  // conservative pixel bbox at gaussian_extent standard deviations
  const double mid = 0.5 * (p.cov_a + p.cov_c);
  const double lam_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
  const double radius = cfg.gaussian_extent * std::sqrt(std::max(lam_max, 0.0));
  p.x0 = std::max(0, static_cast<int>(std::ceil(p.mean2d.x() - radius)));
  p.x1 = std::min(k.width - 1, static_cast<int>(std::floor(p.mean2d.x() + radius)));
  p.y0 = std::max(0, static_cast<int>(std::ceil(p.mean2d.y() - radius)));
  p.y1 = std::min(k.height - 1, static_cast<int>(std::floor(p.mean2d.y() + radius)));
  p.valid = true;
  return p;
}

}  // namespace detail

/// Footprint of one Gaussian; throws nothing, `valid == false` means the
/// Gaussian is clipped by the near plane (and is skipped by the rasterizer).
inline ProjectedGaussian project_gaussian(const GaussianSet& g, std::size_t i,
                                          const CameraIntrinsics& k, const SE3& view,
                                          const RenderConfig& cfg = {}) {
  return detail::project_one(g, i, detail::GaussianTransform{},
                             view.rotation_matrix(), view.translation, k, cfg);
}

struct RenderResult {
  RgbImage image;
  ScalarMap alpha;

  // saved intermediates for the backward pass
  std::vector<ProjectedGaussian> proj;
  std::vector<std::vector<std::int32_t>> survivors;  // per pixel, front-to-back
  std::vector<Vec6> twists;                          // kFieldInterp only

  // snapshot used to detect stale backward calls
  std::size_t n_gaussians = 0;
  MotionMode mode = MotionMode::kNone;
  SE3 cam;
  std::vector<double> ratios;
  CameraIntrinsics intrinsics;
  RenderConfig cfg;
};

/// Depth-sorted front-to-back alpha compositing of the Gaussian set under a
/// world-to-camera view transform. Per pixel, a Gaussian contributes when its
/// Mahalanobis distance is within gaussian_extent and its effective alpha
/// exceeds alpha_threshold; remaining transmittance goes to the background.
inline RenderResult rasterize(const GaussianSet& g, const MotionField* field,
                              MotionMode mode, const std::vector<double>& region_ratios,
                              const SE3& cam, const CameraIntrinsics& k,
                              const RenderConfig& cfg = {}) {
  if (mode != MotionMode::kNone) {
    if (field == nullptr || field->size() != g.size()) {
      throw DimensionMismatch("rasterize: motion field does not match gaussians");
    }
  }
  RenderResult res;
  res.n_gaussians = g.size();
  res.mode = mode;
  res.cam = cam;
  res.ratios = region_ratios;
  res.intrinsics = k;
  res.cfg = cfg;
  res.image = RgbImage(k.width, k.height, 0.0);
  res.alpha = ScalarMap(k.width, k.height, 0.0);
  const std::size_t n = g.size();
  res.proj.resize(n);
  res.survivors.assign(static_cast<std::size_t>(k.width) * k.height, {});

  if (mode == MotionMode::kFieldInterp) {
    res.twists.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      res.twists[i] = g.region_id[i] == 0 ? Vec6::Zero()
                                          : se3_log(field->transform(i));
    }
  }

  const Mat3 r_c = cam.rotation_matrix();
  const Vec3 t_c = cam.translation;
  parallel_chunks(n, 512, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const auto motion = detail::motion_of(g, field, mode, region_ratios,
                                            &res.twists, i);
      res.proj[i] = detail::project_one(g, i, motion, r_c, t_c, k, cfg);
    }
  });

  // global front-to-back order: depth, ties by index
  std::vector<std::int32_t> order;
  order.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (res.proj[i].valid && res.proj[i].x0 <= res.proj[i].x1 &&
        res.proj[i].y0 <= res.proj[i].y1) {
      order.push_back(static_cast<std::int32_t>(i));
    }
  }
  std::sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
    if (res.proj[a].depth != res.proj[b].depth) {
      return res.proj[a].depth < res.proj[b].depth;
    }
    return a < b;
  });

  // bin into tile lists, preserving depth order
  constexpr int kTile = 16;
  const int tiles_x = (k.width + kTile - 1) / kTile;
  const int tiles_y = (k.height + kTile - 1) / kTile;
  std::vector<std::vector<std::int32_t>> tiles(static_cast<std::size_t>(tiles_x) *
                                               tiles_y);
  for (const std::int32_t i : order) {
    const ProjectedGaussian& p = res.proj[i];
    for (int ty = p.y0 / kTile; ty <= p.y1 / kTile; ++ty) {
      for (int tx = p.x0 / kTile; tx <= p.x1 / kTile; ++tx) {
        tiles[static_cast<std::size_t>(ty) * tiles_x + tx].push_back(i);
      }
    }
  }

  const double extent2 = cfg.gaussian_extent * cfg.gaussian_extent;
  parallel_chunks(static_cast<std::size_t>(k.height), 4,
                  [&](std::size_t, std::size_t yb, std::size_t ye) {
    for (std::size_t y = yb; y < ye; ++y) {
      for (int x = 0; x < k.width; ++x) {
        const auto& list =
            tiles[(y / kTile) * static_cast<std::size_t>(tiles_x) + x / kTile];
        auto& surv = res.survivors[y * k.width + x];
        Vec3 c = Vec3::Zero();
        double t = 1.0;
        for (const std::int32_t i : list) {
          const ProjectedGaussian& p = res.proj[i];
          if (x < p.x0 || x > p.x1 || static_cast<int>(y) < p.y0 ||
              static_cast<int>(y) > p.y1) {
            continue;
          }
          const double dx = x - p.mean2d.x();
          const double dy = y - p.mean2d.y();
          const double m = p.q11 * dx * dx + 2.0 * p.q12 * dx * dy + p.q22 * dy * dy;
          if (m > extent2) continue;
          const double alpha = p.opacity * std::exp(-0.5 * m);
          if (alpha <= cfg.alpha_threshold) continue;
          surv.push_back(i);
          c += g.color[i] * (alpha * t);
          t *= 1.0 - alpha;
        }
        c += t * cfg.background;
        for (int ch = 0; ch < 3; ++ch) res.image.at(x, static_cast<int>(y), ch) = c[ch];
        res.alpha.at(x, static_cast<int>(y)) = 1.0 - t;
      }
    }
  });
  return res;
}

/// Gradients of a scalar image loss through the rasterizer. Slots not
/// touched by the mode stay empty.
struct RenderGrads {
  std::vector<Vec3> d_position;
  std::vector<Vec4> d_shape_rot;
  std::vector<Vec3> d_log_scales;
  std::vector<double> d_logit_opacity;
  std::vector<Vec3> d_color;
  std::vector<Vec3> d_field_a1, d_field_a2, d_field_trans;  // kFieldEndpoint
  std::vector<double> d_region_ratio;                       // kFieldInterp
  Vec3 d_cam_a1 = Vec3::Zero();
  Vec3 d_cam_a2 = Vec3::Zero();
  Vec3 d_cam_t = Vec3::Zero();
};

/// Exact reverse-mode pass of `rasterize` for the loss whose per-pixel image
/// gradient is `dL_dimage`. The depth sort is treated as constant. The same
/// gaussians/field/camera/config must be passed as in the forward render.
inline RenderGrads rasterize_backward(const GaussianSet& g, const MotionField* field,
                                      MotionMode mode,
                                      const std::vector<double>& region_ratios,
                                      const SE3& cam, const CameraIntrinsics& k,
                                      const RenderConfig& cfg,
                                      const RenderResult& fwd,
                                      const RgbImage& dL_dimage) {
  if (fwd.n_gaussians != g.size() || fwd.mode != mode || !(fwd.cam == cam) ||
      fwd.ratios != region_ratios || !(fwd.cfg == cfg) ||
      fwd.intrinsics.width != k.width || fwd.intrinsics.height != k.height ||
      fwd.intrinsics.fx != k.fx || fwd.intrinsics.fy != k.fy ||
      fwd.intrinsics.cx != k.cx || fwd.intrinsics.cy != k.cy) {
    throw StaleIntermediates(
        "rasterize_backward: inputs differ from the saved forward render");
  }
  if (dL_dimage.width != k.width || dL_dimage.height != k.height) {
    throw DimensionMismatch("rasterize_backward: gradient image size mismatch");
  }
  const std::size_t n = g.size();
  RenderGrads out;
  out.d_position.assign(n, Vec3::Zero());
  out.d_shape_rot.assign(n, Vec4::Zero());
  out.d_log_scales.assign(n, Vec3::Zero());
  out.d_logit_opacity.assign(n, 0.0);
  out.d_color.assign(n, Vec3::Zero());
  if (mode == MotionMode::kFieldEndpoint) {
    out.d_field_a1.assign(n, Vec3::Zero());
    out.d_field_a2.assign(n, Vec3::Zero());
    out.d_field_trans.assign(n, Vec3::Zero());
  }
  if (mode == MotionMode::kFieldInterp) {
    out.d_region_ratio.assign(region_ratios.size(), 0.0);
  }

  // Pass 1: per-pixel compositing gradients -> screen-space accumulators
  // (dmean2d, dconic, dopacity, dcolor = 9 doubles per gaussian), gathered
  // in fixed-size row chunks and combined in chunk order.
  constexpr std::size_t kRowChunk = 8;
  const std::size_t nchunks = num_chunks_for(static_cast<std::size_t>(k.height), kRowChunk);
  std::vector<std::vector<double>> chunk_acc(nchunks);
  parallel_chunks(static_cast<std::size_t>(k.height), kRowChunk,
                  [&](std::size_t ci, std::size_t yb, std::size_t ye) {
    auto& acc = chunk_acc[ci];
    acc.assign(n * 9, 0.0);
    std::vector<double> alphas, ts;
    for (std::size_t y = yb; y < ye; ++y) {
      for (int x = 0; x < k.width; ++x) {
        const auto& surv = fwd.survivors[y * k.width + x];
        if (surv.empty()) continue;
        const Vec3 dldc(dL_dimage.at(x, static_cast<int>(y), 0),
                        dL_dimage.at(x, static_cast<int>(y), 1),
                        dL_dimage.at(x, static_cast<int>(y), 2));
        // rebuild per-survivor alphas and transmittance prefixes
        alphas.resize(surv.size());
        ts.resize(surv.size());
        double t = 1.0;
        for (std::size_t s = 0; s < surv.size(); ++s) {
          const ProjectedGaussian& p = fwd.proj[surv[s]];
          const double dx = x - p.mean2d.x();
          const double dy = y - p.mean2d.y();
          const double m = p.q11 * dx * dx + 2.0 * p.q12 * dx * dy + p.q22 * dy * dy;
          alphas[s] = p.opacity * std::exp(-0.5 * m);
          ts[s] = t;
          t *= 1.0 - alphas[s];
        }
        // back-to-front walk: color composited behind each survivor
        Vec3 behind = cfg.background;
        for (std::size_t s = surv.size(); s-- > 0;) {
          const std::int32_t i = surv[s];
          const ProjectedGaussian& p = fwd.proj[i];
          const double a = alphas[s];
          const double tk = ts[s];
          double* slot = &acc[static_cast<std::size_t>(i) * 9];
          // d/dcolor
          slot[6] += dldc[0] * a * tk;
          slot[7] += dldc[1] * a * tk;
          slot[8] += dldc[2] * a * tk;
          // d/dalpha without dividing by (1 - a)
          const double dl_da = dldc.dot(tk * (g.color[i] - behind));
          behind = a * g.color[i] + (1.0 - a) * behind;
          // alpha = opacity * exp(-m/2)
          const double gval = a / p.opacity;
          slot[5] += dl_da * gval;  // d/dopacity
          const double dl_dm = dl_da * p.opacity * gval * -0.5;
          const double dx = x - p.mean2d.x();
          const double dy = y - p.mean2d.y();
          slot[2] += dl_dm * dx * dx;        // d/dq11
          slot[3] += dl_dm * 2.0 * dx * dy;  // d/dq12
          slot[4] += dl_dm * dy * dy;        // d/dq22
          // d/dmean2d = +dL/d(delta) since delta = pixel - mean
          const double ddx = dl_dm * (2.0 * p.q11 * dx + 2.0 * p.q12 * dy);
          const double ddy = dl_dm * (2.0 * p.q22 * dy + 2.0 * p.q12 * dx);
          slot[0] -= ddx;
          slot[1] -= ddy;
        }
      }
    }
  });

  std::vector<double> acc(n * 9, 0.0);
  for (const auto& c : chunk_acc) {
    if (c.empty()) continue;
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += c[i];
  }
  chunk_acc.clear();

  // Pass 2: chain screen-space gradients to the parameters, per gaussian.
  // Camera and ratio accumulators are per-chunk, combined in order.
  const Mat3 r_c = cam.rotation_matrix();
  const Vec3 t_c = cam.translation;
  struct SharedAcc {
    Mat3 d_rc = Mat3::Zero();
    Vec3 d_tc = Vec3::Zero();
    std::vector<double> d_ratio;
  };
  constexpr std::size_t kGaussChunk = 512;
  const std::size_t gchunks = num_chunks_for(n, kGaussChunk);
  std::vector<SharedAcc> shared(gchunks);
  parallel_chunks(n, kGaussChunk, [&](std::size_t ci, std::size_t b, std::size_t e) {
    SharedAcc& sh = shared[ci];
    sh.d_ratio.assign(mode == MotionMode::kFieldInterp ? region_ratios.size() : 0, 0.0);
    for (std::size_t i = b; i < e; ++i) {
      const ProjectedGaussian& p = fwd.proj[i];
      if (!p.valid) continue;
      const double* slot = &acc[i * 9];
      bool any = false;
      for (int s = 0; s < 9; ++s) any = any || slot[s] != 0.0;
      if (any) {
        out.d_color[i] += Vec3(slot[6], slot[7], slot[8]);
        out.d_logit_opacity[i] += slot[5] * p.opacity * (1.0 - p.opacity);

        // recompute the projection internals
        const auto motion = detail::motion_of(g, field, mode, region_ratios,
                                              &fwd.twists, i);
        const Vec3 x_m = motion.r_a * g.positions[i] + motion.t_a;
        const Vec3 x_c = r_c * x_m + t_c;
        const double iz = 1.0 / x_c.z();
        const Mat3 r = r_c * motion.r_a;
        const Mat3 r_s = quat_to_matrix_normalized(g.shape_rot[i]);
        const Vec3 s2 = (2.0 * g.log_scales[i]).array().exp();
        const Mat3 sigma_w = r_s * s2.asDiagonal() * r_s.transpose();
        const Mat3 sigma_c = r * sigma_w * r.transpose();
        Eigen::Matrix<double, 2, 3> j;
        j << k.fx * iz, 0.0, -k.fx * x_c.x() * iz * iz,  //
            0.0, k.fy * iz, -k.fy * x_c.y() * iz * iz;

        // conic -> covariance entries
        const double a = p.cov_a, bb = p.cov_b, c = p.cov_c;
        const double det = a * c - bb * bb;
        const double inv_det2 = 1.0 / (det * det);
        const double gq11 = slot[2], gq12 = slot[3], gq22 = slot[4];
        const double da =
            inv_det2 * (gq11 * (-c * c) + gq12 * (bb * c) + gq22 * (-bb * bb));
        const double db = inv_det2 * (gq11 * (2.0 * bb * c) +
                                      gq12 * (-(a * c + bb * bb)) +
                                      gq22 * (2.0 * a * bb));
        const double dc =
            inv_det2 * (gq11 * (-bb * bb) + gq12 * (a * bb) + gq22 * (-a * a));
        Mat2 g2;
        g2 << da, 0.5 * db, 0.5 * db, dc;

        // cov = J Sigma_c J^T (+ constant dilation)
        const Mat3 d_sigma_c = j.transpose() * g2 * j;
        const Eigen::Matrix<double, 2, 3> dj = 2.0 * g2 * j * sigma_c;

        Vec3 d_xc = Vec3::Zero();
        d_xc.x() += dj(0, 2) * (-k.fx * iz * iz);
        d_xc.y() += dj(1, 2) * (-k.fy * iz * iz);
        d_xc.z() += dj(0, 0) * (-k.fx * iz * iz) +
                    dj(0, 2) * (2.0 * k.fx * x_c.x() * iz * iz * iz) +
                    dj(1, 1) * (-k.fy * iz * iz) +
                    dj(1, 2) * (2.0 * k.fy * x_c.y() * iz * iz * iz);

        // mean2d -> camera point (same Jacobian)
        const Vec2 gm2(slot[0], slot[1]);
        d_xc += j.transpose() * gm2;

        // Sigma_c = R Sigma_w R^T
        const Mat3 d_sigma_w = r.transpose() * d_sigma_c * r;
        Mat3 d_r = 2.0 * d_sigma_c * r * sigma_w;

        // Sigma_w = R_s diag(s^2) R_s^T
        const Mat3 d_rs = 2.0 * d_sigma_w * r_s * s2.asDiagonal();
        const Mat3 rks = r_s.transpose() * d_sigma_w * r_s;
        for (int mcol = 0; mcol < 3; ++mcol) {
          out.d_log_scales[i][mcol] += rks(mcol, mcol) * 2.0 * s2[mcol];
        }
        quat_backward(g.shape_rot[i], d_rs, &out.d_shape_rot[i]);

        // split R = R_c R_a and the mean path
        Mat3 d_rc = d_r * motion.r_a.transpose();
        Mat3 d_ra = r_c.transpose() * d_r;
        d_rc += d_xc * x_m.transpose();
        sh.d_tc += d_xc;
        const Vec3 d_xm = r_c.transpose() * d_xc;
        d_ra += d_xm * g.positions[i].transpose();
        const Vec3 d_ta = d_xm;
        out.d_position[i] += motion.r_a.transpose() * d_xm;
        sh.d_rc += d_rc;

        if (mode == MotionMode::kFieldEndpoint) {
          rot6d_backward(field->rot6[i], d_ra, &out.d_field_a1[i],
                         &out.d_field_a2[i]);
          out.d_field_trans[i] += d_ta;
        } else if (mode == MotionMode::kFieldInterp && g.region_id[i] != 0) {
          // d/d ratio of exp(ratio * xi): dR = R_a hat(w), dt = R_a v
          const Vec6& xi = fwd.twists[i];
          const Mat3 dr_dratio = motion.r_a * skew(xi.tail<3>());
          const Vec3 dt_dratio = motion.r_a * xi.head<3>();
          sh.d_ratio[g.region_id[i]] +=
              (d_ra.array() * dr_dratio.array()).sum() + d_ta.dot(dt_dratio);
        }
      }
    }
  });

  Mat3 d_rc_total = Mat3::Zero();
  for (const SharedAcc& sh : shared) {
    d_rc_total += sh.d_rc;
    out.d_cam_t += sh.d_tc;
    for (std::size_t r = 0; r < sh.d_ratio.size(); ++r) {
      out.d_region_ratio[r] += sh.d_ratio[r];
    }
  }
  rot6d_backward(cam.rotation, d_rc_total, &out.d_cam_a1, &out.d_cam_a2);
  return out;
}

}  // namespace dynsplat
