// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "dynsplat/field/motion_field.hpp"
#include "dynsplat/image/metrics.hpp"
#include "dynsplat/opt/adam.hpp"
#include "dynsplat/splat/rasterizer.hpp"

namespace dynsplat {

struct AlignConfig {
  int iters = 400;
  double lr_pose = 1e-3;
  double lr_ratio = 5e-2;
  bool optimize_ratios = true;  // false: ratios pinned at 0.5
};

struct AlignResult {
  SE3 t_cam_test;
  std::vector<double> ratios;  // per dynamic region (index 0 <-> region 1)
  double final_loss = 0.0;
  std::vector<double> loss_curve;
};

/// Test-time alignment: the trained model is frozen; only the test camera
/// pose and the per-object interpolation ratios move. Ratios start at 0.5
/// ("halfway between the two frames") and live behind a sigmoid so they stay
/// in (0, 1).
inline AlignResult test_time_align(const GaussianSet& g, const MotionField& field,
                                   const RgbImage& i_test, const CameraIntrinsics& k,
                                   const SE3& init_pose, const AlignConfig& cfg,
                                   const RenderConfig& rcfg = {}) {
  int num_regions = 0;
  for (int r : g.region_id) num_regions = std::max(num_regions, r + 1);
  const int num_dynamic = std::max(0, num_regions - 1);

  // params: camera (9) + raw ratio per dynamic region
  std::vector<double> params(9 + num_dynamic, 0.0);
  for (int a = 0; a < 3; ++a) {
    params[a] = init_pose.rotation.a1[a];
    params[3 + a] = init_pose.rotation.a2[a];
    params[6 + a] = init_pose.translation[a];
  }
  // sigmoid(0) = 0.5

  std::vector<AdamGroup> groups = {{0, 9, cfg.lr_pose}};
  if (cfg.optimize_ratios && num_dynamic > 0) {
    groups.push_back({9, static_cast<std::size_t>(num_dynamic), cfg.lr_ratio});
  }
  Adam adam(params.size(), groups);

  AlignResult res;
  std::vector<double> region_ratios(num_regions, 0.0);
  std::vector<double> grad(params.size(), 0.0);
  SE3 pose = init_pose;
  for (int it = 0; it < cfg.iters; ++it) {
    pose.rotation.a1 = Vec3(params[0], params[1], params[2]);
    pose.rotation.a2 = Vec3(params[3], params[4], params[5]);
    pose.translation = Vec3(params[6], params[7], params[8]);
    for (int r = 1; r < num_regions; ++r) region_ratios[r] = sigmoid(params[9 + r - 1]);

    const RenderResult render = rasterize(g, &field, MotionMode::kFieldInterp,
                                          region_ratios, pose, k, rcfg);
    const ImageLossResult il = image_loss(render.image, i_test, rcfg.dssim_weight);
    if (!std::isfinite(il.loss)) {
      throw NonFiniteLoss("test_time_align: non-finite loss at step " +
                          std::to_string(it));
    }
    res.loss_curve.push_back(il.loss);
    const RenderGrads grads =
        rasterize_backward(g, &field, MotionMode::kFieldInterp, region_ratios, pose,
                           k, rcfg, render, il.grad);

    std::fill(grad.begin(), grad.end(), 0.0);
    for (int a = 0; a < 3; ++a) {
      grad[a] = grads.d_cam_a1[a];
      grad[3 + a] = grads.d_cam_a2[a];
      grad[6 + a] = grads.d_cam_t[a];
    }
    if (cfg.optimize_ratios) {
      for (int r = 1; r < num_regions; ++r) {
        const double s = region_ratios[r];
        grad[9 + r - 1] = grads.d_region_ratio[r] * s * (1.0 - s);
      }
    }
    adam.step(params, grad);
  }

  pose.rotation.a1 = Vec3(params[0], params[1], params[2]);
  pose.rotation.a2 = Vec3(params[3], params[4], params[5]);
  pose.translation = Vec3(params[6], params[7], params[8]);
  for (int r = 1; r < num_regions; ++r) region_ratios[r] = sigmoid(params[9 + r - 1]);
  const RenderResult render = rasterize(g, &field, MotionMode::kFieldInterp,
                                        region_ratios, pose, k, rcfg);
  res.final_loss = image_loss(render.image, i_test, rcfg.dssim_weight).loss;
  res.t_cam_test = pose;
  res.ratios.assign(region_ratios.begin() + 1, region_ratios.end());
  return res;
}

}  // namespace dynsplat
