// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "dynsplat/field/motion_field.hpp"
#include "dynsplat/image/metrics.hpp"
#include "dynsplat/opt/adam.hpp"
#include "dynsplat/splat/rasterizer.hpp"

namespace dynsplat {

struct TrainConfig {
  int iters = 1000;
  // splatting block rates; position is additionally scaled by scene extent
  double lr_position = 1.6e-4;
  double lr_shape_rot = 1e-3;
  double lr_log_scales = 5e-3;
  double lr_logit_opacity = 5e-2;
  double lr_color = 2.5e-3;
  // pose-like rates
  double lr_field = 1e-4;
  double lr_cam = 1e-4;
  // motion-coherence regularizer
  double lambda_t = 1.0;
  double lambda_r = 1.0;
  double reg_scale = 1.0;
  double huber_delta = 0.01;
  std::uint64_t seed = 0;
  int metrics_every = 100;
};

struct TrainSnapshot {
  int iter = 0;
  double loss0 = 0.0, loss1 = 0.0, reg = 0.0, total = 0.0;
};

struct TrainResult {
  GaussianSet gaussians;
  MotionField field;
  SE3 t_cam;  // refined frame-1 view transform
  std::vector<TrainSnapshot> curve;
  double psnr0 = 0.0, psnr1 = 0.0;
  double ssim0 = 0.0, ssim1 = 0.0;
};

namespace detail {

/// Flat parameter layout shared by train(): gaussian blocks, field blocks,
/// camera pose.
struct TrainLayout {
  std::size_t n = 0;
  std::size_t pos = 0, quat = 0, scales = 0, opacity = 0, color = 0;
  std::size_t field_a1 = 0, field_a2 = 0, field_t = 0, cam = 0, total = 0;

  explicit TrainLayout(std::size_t n_gaussians) : n(n_gaussians) {
    std::size_t off = 0;
    pos = off;
    off += 3 * n;
    quat = off;
    off += 4 * n;
    scales = off;
    off += 3 * n;
    opacity = off;
    off += n;
    color = off;
    off += 3 * n;
    field_a1 = off;
    off += 3 * n;
    field_a2 = off;
    off += 3 * n;
    field_t = off;
    off += 3 * n;
    cam = off;
    off += 9;
    total = off;
  }

  void pack(const GaussianSet& g, const MotionField& f, const SE3& cam_pose,
            std::vector<double>* p) const {
    p->assign(total, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (int a = 0; a < 3; ++a) {
        (*p)[pos + 3 * i + a] = g.positions[i][a];
        (*p)[scales + 3 * i + a] = g.log_scales[i][a];
        (*p)[color + 3 * i + a] = g.color[i][a];
        (*p)[field_a1 + 3 * i + a] = f.rot6[i].a1[a];
        (*p)[field_a2 + 3 * i + a] = f.rot6[i].a2[a];
        (*p)[field_t + 3 * i + a] = f.trans[i][a];
      }
      for (int a = 0; a < 4; ++a) (*p)[quat + 4 * i + a] = g.shape_rot[i][a];
      (*p)[opacity + i] = g.logit_opacity[i];
    }
    for (int a = 0; a < 3; ++a) {
      (*p)[cam + a] = cam_pose.rotation.a1[a];
      (*p)[cam + 3 + a] = cam_pose.rotation.a2[a];
      (*p)[cam + 6 + a] = cam_pose.translation[a];
    }
  }

  void unpack(const std::vector<double>& p, GaussianSet* g, MotionField* f,
              SE3* cam_pose) const {
    for (std::size_t i = 0; i < n; ++i) {
      for (int a = 0; a < 3; ++a) {
        g->positions[i][a] = p[pos + 3 * i + a];
        g->log_scales[i][a] = p[scales + 3 * i + a];
        g->color[i][a] = p[color + 3 * i + a];
        f->rot6[i].a1[a] = p[field_a1 + 3 * i + a];
        f->rot6[i].a2[a] = p[field_a2 + 3 * i + a];
        f->trans[i][a] = p[field_t + 3 * i + a];
      }
      for (int a = 0; a < 4; ++a) g->shape_rot[i][a] = p[quat + 4 * i + a];
      g->logit_opacity[i] = p[opacity + i];
    }
    cam_pose->rotation.a1 = Vec3(p[cam], p[cam + 1], p[cam + 2]);
    cam_pose->rotation.a2 = Vec3(p[cam + 3], p[cam + 4], p[cam + 5]);
    cam_pose->translation = Vec3(p[cam + 6], p[cam + 7], p[cam + 8]);
  }
};

inline double scene_extent(const GaussianSet& g) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::max());
  Vec3 hi = Vec3::Constant(std::numeric_limits<double>::lowest());
  for (const Vec3& p : g.positions) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return std::max(0.5 * (hi - lo).norm(), 1e-6);
}

}  // namespace detail

/// Joint photometric fit: renders frame 0 from the identity camera (the
/// world gauge) and frame 1 from the optimized camera with the field applied,
/// steps Gaussian parameters, the field, and the frame-1 camera with Adam.
/// Static field entries stay pinned at identity.
inline TrainResult train(const GaussianSet& g0, const MotionField& field0,
                         const SE3& t_cam_init, const RgbImage& i0,
                         const RgbImage& i1, const CameraIntrinsics& k,
                         const TrainConfig& cfg, const RenderConfig& rcfg = {}) {
  TrainResult res;
  res.gaussians = g0;
  res.field = field0;
  res.t_cam = t_cam_init;
  const std::size_t n = g0.size();
  const detail::TrainLayout layout(n);

  std::vector<double> params;
  layout.pack(res.gaussians, res.field, res.t_cam, &params);

  const double extent = detail::scene_extent(g0);
  std::vector<AdamGroup> groups = {
      {layout.pos, 3 * n, cfg.lr_position * extent},
      {layout.quat, 4 * n, cfg.lr_shape_rot},
      {layout.scales, 3 * n, cfg.lr_log_scales},
      {layout.opacity, n, cfg.lr_logit_opacity},
      {layout.color, 3 * n, cfg.lr_color},
      {layout.field_a1, 9 * n, cfg.lr_field},  // a1, a2, t are contiguous
      {layout.cam, 9, cfg.lr_cam},
  };
  Adam adam(layout.total, groups);

  std::vector<double> grad(layout.total, 0.0);
  const std::vector<double> no_ratios;
  for (int it = 0; it < cfg.iters; ++it) {
    layout.unpack(params, &res.gaussians, &res.field, &res.t_cam);
    std::fill(grad.begin(), grad.end(), 0.0);

    const RenderResult r0 = rasterize(res.gaussians, &res.field, MotionMode::kNone,
                                      no_ratios, SE3::identity(), k, rcfg);
    const ImageLossResult il0 = image_loss(r0.image, i0, rcfg.dssim_weight);
    const RenderGrads g0grads =
        rasterize_backward(res.gaussians, &res.field, MotionMode::kNone, no_ratios,
                           SE3::identity(), k, rcfg, r0, il0.grad);

    const RenderResult r1 =
        rasterize(res.gaussians, &res.field, MotionMode::kFieldEndpoint, no_ratios,
                  res.t_cam, k, rcfg);
    const ImageLossResult il1 = image_loss(r1.image, i1, rcfg.dssim_weight);
    const RenderGrads g1grads =
        rasterize_backward(res.gaussians, &res.field, MotionMode::kFieldEndpoint,
                           no_ratios, res.t_cam, k, rcfg, r1, il1.grad);

    FieldRegGrads reg_grads;
    const double reg =
        cfg.reg_scale * field_regularization(res.field, cfg.lambda_t, cfg.lambda_r,
                                             cfg.huber_delta, &reg_grads);

    const double total = il0.loss + il1.loss + reg;
    if (!std::isfinite(total)) {
      throw NonFiniteLoss("train: non-finite loss at step " + std::to_string(it));
    }
    res.curve.push_back({it, il0.loss, il1.loss, reg, total});

    for (std::size_t i = 0; i < n; ++i) {
      const bool dynamic = res.gaussians.region_id[i] != 0;
      for (int a = 0; a < 3; ++a) {
        grad[layout.pos + 3 * i + a] =
            g0grads.d_position[i][a] + g1grads.d_position[i][a];
        grad[layout.scales + 3 * i + a] =
            g0grads.d_log_scales[i][a] + g1grads.d_log_scales[i][a];
        grad[layout.color + 3 * i + a] =
            g0grads.d_color[i][a] + g1grads.d_color[i][a];
        if (dynamic) {
          grad[layout.field_a1 + 3 * i + a] =
              g1grads.d_field_a1[i][a] + cfg.reg_scale * reg_grads.d_a1[i][a];
          grad[layout.field_a2 + 3 * i + a] =
              g1grads.d_field_a2[i][a] + cfg.reg_scale * reg_grads.d_a2[i][a];
          grad[layout.field_t + 3 * i + a] =
              g1grads.d_field_trans[i][a] + cfg.reg_scale * reg_grads.d_trans[i][a];
        }
      }
      for (int a = 0; a < 4; ++a) {
        grad[layout.quat + 4 * i + a] =
            g0grads.d_shape_rot[i][a] + g1grads.d_shape_rot[i][a];
      }
      grad[layout.opacity + i] =
          g0grads.d_logit_opacity[i] + g1grads.d_logit_opacity[i];
    }
    for (int a = 0; a < 3; ++a) {
      grad[layout.cam + a] = g1grads.d_cam_a1[a];
      grad[layout.cam + 3 + a] = g1grads.d_cam_a2[a];
      grad[layout.cam + 6 + a] = g1grads.d_cam_t[a];
    }

    adam.step(params, grad);

    // keep shape rotations unit quaternions
    for (std::size_t i = 0; i < n; ++i) {
      double norm2 = 0.0;
      for (int a = 0; a < 4; ++a) {
        const double v = params[layout.quat + 4 * i + a];
        norm2 += v * v;
      }
      const double inv = 1.0 / std::sqrt(norm2);
      for (int a = 0; a < 4; ++a) params[layout.quat + 4 * i + a] *= inv;
    }
  }

  layout.unpack(params, &res.gaussians, &res.field, &res.t_cam);
  const RenderResult r0 = rasterize(res.gaussians, &res.field, MotionMode::kNone,
                                    no_ratios, SE3::identity(), k, rcfg);
  const RenderResult r1 = rasterize(res.gaussians, &res.field,
                                    MotionMode::kFieldEndpoint, no_ratios, res.t_cam,
                                    k, rcfg);
  res.psnr0 = psnr(r0.image, i0);
  res.psnr1 = psnr(r1.image, i1);
  res.ssim0 = ssim(r0.image, i0);
  res.ssim1 = ssim(r1.image, i1);
  return res;
}

}  // namespace dynsplat
