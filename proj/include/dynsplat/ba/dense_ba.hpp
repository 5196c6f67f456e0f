// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dynsplat/core/error.hpp"
#include "dynsplat/core/parallel.hpp"
#include "dynsplat/core/robust.hpp"
#include "dynsplat/flow/consistency.hpp"
#include "dynsplat/geometry/camera.hpp"
#include "dynsplat/geometry/se3.hpp"
#include "dynsplat/io/manifest.hpp"
#include "dynsplat/opt/adam.hpp"

namespace dynsplat {

struct BAParams {
  double lambda1 = 1.0;     // reprojection weight
  double lambda2 = 0.1;     // depth regularization weight
  double lr_depth = 1e-3;   // depth and scale/shift group
  double lr_pose = 1e-4;    // pose group
  int iters = 2000;
  bool bidirectional = true;
  double huber_reproj = 0.1;   // px; optimization smoothing of the L1 terms
  double huber_depth = 0.01;   // scene units
  ConsistencyParams consistency;
};

/// True-L1 values of the four loss terms. `total` carries the
/// lambda-weighted sum (the reported objective).
struct BATermLosses {
  double reproj_fwd = 0.0;
  double depth_fwd = 0.0;
  double reproj_bwd = 0.0;
  double depth_bwd = 0.0;
  double total = 0.0;
};

struct BAResult {
  SE3 t_cam;                 // world (frame-0 camera) -> frame-1 camera view
  std::vector<SE3> t_obj;    // world-frame t0->t1 motion per dynamic region
  ScalarMap depth0, depth1;  // refined depths (NaN where input was invalid)
  double theta0 = 1.0, gamma0 = 0.0, theta1 = 1.0, gamma1 = 0.0;
  BATermLosses initial_losses, final_losses;
  std::vector<BATermLosses> trajectory;
  std::vector<int> region_pixels;          // valid-depth pixels per region
  std::vector<int> region_weighted_pixels; // of those, forward-weighted
};

/// Object-level dense bundle adjustment: per-region rigid motions, dense
/// log-depths, and per-frame scale/shift, jointly optimized with Adam.
///
/// Parameter vector layout: [region poses: 9 each (6D rotation + t)]
/// [theta0 gamma0 theta1 gamma1] [log D^0 per valid frame-0 pixel]
/// [log D^1 per valid frame-1 pixel, bidirectional only].
class DenseBA {
 public:
  DenseBA(const SceneData& scene, const BAParams& params)
      : k_(scene.manifest.intrinsics),
        params_(params),
        num_regions_(scene.num_regions) {
    build(scene);
  }

  int num_regions() const { return num_regions_; }
  std::size_t num_params() const { return total_params_; }
  std::size_t pose_offset(int region) const { return 9 * static_cast<std::size_t>(region); }
  std::size_t scale_shift_offset() const { return ss_offset_; }
  std::size_t depth0_offset() const { return d0_offset_; }
  std::size_t depth1_offset() const { return d1_offset_; }

  /// Initial parameter vector: given region transforms, depth from the input
  /// maps, scale/shift at (1, 0).
  std::vector<double> initial_state(const std::vector<SE3>& transforms) const {
    if (static_cast<int>(transforms.size()) != num_regions_) {
      throw DimensionMismatch("dense_ba: need one initial transform per region");
    }
    std::vector<double> p(total_params_, 0.0);
    for (int r = 0; r < num_regions_; ++r) {
      double* q = &p[pose_offset(r)];
      for (int a = 0; a < 3; ++a) {
        q[a] = transforms[r].rotation.a1[a];
        q[3 + a] = transforms[r].rotation.a2[a];
        q[6 + a] = transforms[r].translation[a];
      }
    }
    p[ss_offset_] = 1.0;      // theta0
    p[ss_offset_ + 1] = 0.0;  // gamma0
    p[ss_offset_ + 2] = 1.0;  // theta1
    p[ss_offset_ + 3] = 0.0;  // gamma1
    for (const auto& region_pixels : fwd_) {
      for (const auto& px : region_pixels) {
        p[d0_offset_ + px.depth_idx] = std::log(px.d0);
      }
    }
    for (std::size_t i = 0; i < d1_init_.size(); ++i) {
      p[d1_offset_ + i] = std::log(d1_init_[i]);
    }
    return p;
  }

  /// Forward reprojection loss of one region (Eq. 1 analogue). Returns the
  /// smoothed value; *l1 receives the true L1. Gradients are accumulated
  /// when grad is non-null (lambda weights are NOT applied here).
  double reproj_loss(std::span<const double> state, int region,
                     std::span<double> grad, double* l1) const {
    check_region(region);
    double huber_sum = 0.0, l1_sum = 0.0;
    eval_region_range(state, region, 0, fwd_[region].size(), grad, 1.0, 0.0,
                      &huber_sum, &l1_sum, nullptr, nullptr);
    if (l1) *l1 = l1_sum;
    return huber_sum;
  }

  /// Depth regularization of one region (Eq. 2 analogue): the scale/shift
  /// prior plus the cross-frame 3D consistency term.
  double depth_reg_loss(std::span<const double> state, int region,
                        std::span<double> grad, double* l1) const {
    check_region(region);
    double huber_sum = 0.0, l1_sum = 0.0;
    eval_region_range(state, region, 0, fwd_[region].size(), grad, 0.0, 1.0,
                      nullptr, nullptr, &huber_sum, &l1_sum);
    if (l1) *l1 = l1_sum;
    return huber_sum;
  }

  /// Complete objective (Eq. 3 analogue): lambda-weighted sum over regions,
  /// plus the static-region backward terms when bidirectional is on.
  /// Deterministic chunked accumulation; parallel-safe.
  double total_loss(std::span<const double> state, std::span<double> grad,
                    BATermLosses* terms) const {
    struct Shared {
      std::vector<double> pose_ss;  // pose block + scale/shift gradients
      double h_reproj = 0.0, l_reproj = 0.0, h_depth = 0.0, l_depth = 0.0;
    };
    const std::size_t shared_n = 9 * static_cast<std::size_t>(num_regions_) + 4;

    BATermLosses t;
    double huber_total = 0.0;

    // forward terms, all regions, one flat chunked sweep
    const std::size_t nfwd = fwd_flat_.size();
    const std::size_t chunk = 2048;
    std::vector<Shared> partial(num_chunks_for(nfwd, chunk));
    parallel_chunks(nfwd, chunk, [&](std::size_t ci, std::size_t b, std::size_t e) {
      Shared& sh = partial[ci];
      if (!grad.empty()) sh.pose_ss.assign(shared_n, 0.0);
      std::size_t i = b;
      while (i < e) {
        const int region = fwd_flat_[i].first;
        std::size_t j = i;
        while (j < e && fwd_flat_[j].first == region) ++j;
        eval_region_range(state, region, fwd_flat_[i].second,
                          fwd_flat_[j - 1].second + 1,
                          grad.empty() ? std::span<double>{} : std::span<double>(grad),
                          params_.lambda1, params_.lambda2, &sh.h_reproj,
                          &sh.l_reproj, &sh.h_depth, &sh.l_depth,
                          grad.empty() ? nullptr : sh.pose_ss.data());
        i = j;
      }
    });
    for (const Shared& sh : partial) {
      t.reproj_fwd += sh.l_reproj;
      t.depth_fwd += sh.l_depth;
      huber_total += params_.lambda1 * sh.h_reproj + params_.lambda2 * sh.h_depth;
      if (!grad.empty() && !sh.pose_ss.empty()) {
        for (std::size_t i = 0; i < shared_n; ++i) grad[i] += sh.pose_ss[i];
      }
    }

    if (params_.bidirectional) {
      const std::size_t nbwd = bwd_.size();
      std::vector<Shared> bpartial(num_chunks_for(nbwd, chunk));
      parallel_chunks(nbwd, chunk, [&](std::size_t ci, std::size_t b, std::size_t e) {
        Shared& sh = bpartial[ci];
        if (!grad.empty()) sh.pose_ss.assign(shared_n, 0.0);
        eval_backward_range(state, b, e,
                            grad.empty() ? std::span<double>{} : std::span<double>(grad),
                            &sh.h_reproj, &sh.l_reproj, &sh.h_depth, &sh.l_depth,
                            grad.empty() ? nullptr : sh.pose_ss.data());
      });
      for (const Shared& sh : bpartial) {
        t.reproj_bwd += sh.l_reproj;
        t.depth_bwd += sh.l_depth;
        huber_total += params_.lambda1 * sh.h_reproj + params_.lambda2 * sh.h_depth;
        if (!grad.empty() && !sh.pose_ss.empty()) {
          for (std::size_t i = 0; i < shared_n; ++i) grad[i] += sh.pose_ss[i];
        }
      }
    }

    t.total = params_.lambda1 * (t.reproj_fwd + t.reproj_bwd) +
              params_.lambda2 * (t.depth_fwd + t.depth_bwd);
    if (terms) *terms = t;
    return huber_total;
  }

  /// Full optimization loop.
  BAResult run(const std::vector<SE3>& init_transforms) const {
    std::vector<double> state = initial_state(init_transforms);
    std::vector<AdamGroup> groups;
    groups.push_back({0, 9 * static_cast<std::size_t>(num_regions_), params_.lr_pose});
    groups.push_back({ss_offset_, total_params_ - ss_offset_, params_.lr_depth});
    Adam adam(total_params_, groups);

    BAResult res;
    res.trajectory.reserve(params_.iters);
    std::vector<double> grad(total_params_, 0.0);
    for (int it = 0; it < params_.iters; ++it) {
      std::fill(grad.begin(), grad.end(), 0.0);
      BATermLosses terms;
      const double huber = total_loss(state, grad, &terms);
      if (!std::isfinite(huber)) {
        throw NonFiniteLoss("dense_ba: non-finite " + worst_term(terms) +
                            " at iteration " + std::to_string(it));
      }
      res.trajectory.push_back(terms);
      adam.step(state, grad);
    }
    total_loss(state, {}, &res.final_losses);
    res.initial_losses = res.trajectory.empty() ? res.final_losses : res.trajectory.front();

    res.t_cam = pose_of(state, 0);
    const SE3 cam_inv = se3_inverse(res.t_cam);
    for (int r = 1; r < num_regions_; ++r) {
      res.t_obj.push_back(se3_compose(cam_inv, pose_of(state, r)));
    }
    res.theta0 = state[ss_offset_];
    res.gamma0 = state[ss_offset_ + 1];
    res.theta1 = state[ss_offset_ + 2];
    res.gamma1 = state[ss_offset_ + 3];

    res.depth0 = ScalarMap(k_.width, k_.height,
                           std::numeric_limits<double>::quiet_NaN());
    for (const auto& [region, idx] : fwd_flat_) {
      const FwdPixel& px = fwd_[region][idx];
      res.depth0.at(px.x, px.y) = std::exp(state[d0_offset_ + px.depth_idx]);
    }
    res.depth1 = d1_full_;
    if (params_.bidirectional) {
      for (int y = 0; y < k_.height; ++y) {
        for (int x = 0; x < k_.width; ++x) {
          const int idx = depth1_index_[static_cast<std::size_t>(y) * k_.width + x];
          if (idx >= 0) res.depth1.at(x, y) = std::exp(state[d1_offset_ + idx]);
        }
      }
    }
    res.region_pixels = region_pixels_;
    res.region_weighted_pixels = region_weighted_;
    return res;
  }

  SE3 pose_of(std::span<const double> state, int region) const {
    const double* q = &state[pose_offset(region)];
    return SE3{Rot6d{Vec3(q[0], q[1], q[2]), Vec3(q[3], q[4], q[5])},
               Vec3(q[6], q[7], q[8])};
  }

  const ScalarMap& w_fwd() const { return w_fwd_; }
  const ScalarMap& w_bwd() const { return w_bwd_; }

 private:
  struct FwdPixel {
    int x, y;
    int depth_idx;
    double w = 0.0;      // forward confidence
    Vec2 p1;             // tracked pixel
    Vec3 ray0, ray1;     // K^-1 homogeneous rays
    double d0 = 0.0;     // input depth at the pixel
    double d1s = 0.0;    // input frame-1 depth sampled at p1
    bool active = false; // participates in reprojection + cross-frame terms
  };
  struct BwdPixel {
    int x, y;
    int depth_idx;
    double w = 0.0;
    Vec2 p0;
    Vec3 ray1, ray0;
    double d1 = 0.0;
    double d0s = 0.0;
  };

  void build(const SceneData& scene) {
    w_fwd_ = forward_backward_weights(scene.flow_fwd, scene.flow_bwd,
                                      params_.consistency);
    w_bwd_ = forward_backward_weights(scene.flow_bwd, scene.flow_fwd,
                                      params_.consistency);
    fwd_.resize(num_regions_);
    region_pixels_.assign(num_regions_, 0);
    region_weighted_.assign(num_regions_, 0);
    depth0_index_.assign(static_cast<std::size_t>(k_.width) * k_.height, -1);
    depth1_index_.assign(static_cast<std::size_t>(k_.width) * k_.height, -1);

    int n_d0 = 0;
    for (int y = 0; y < k_.height; ++y) {
      for (int x = 0; x < k_.width; ++x) {
        const double d = scene.d0.at(x, y);
        if (!std::isfinite(d) || d <= 0.0) continue;
        FwdPixel px;
        px.x = x;
        px.y = y;
        px.depth_idx = n_d0++;
        depth0_index_[static_cast<std::size_t>(y) * k_.width + x] = px.depth_idx;
        px.d0 = d;
        px.ray0 = pixel_ray(k_, Pixel(x, y));
        px.w = w_fwd_.at(x, y);
        px.p1 = Vec2(x + scene.flow_fwd.du(x, y), y + scene.flow_fwd.dv(x, y));
        if (px.w > 0.0 && in_image(k_.width, k_.height, px.p1.x(), px.p1.y())) {
          const double d1s = sample_bilinear(scene.d1, px.p1.x(), px.p1.y());
          if (std::isfinite(d1s) && d1s > 0.0) {
            px.d1s = d1s;
            px.ray1 = pixel_ray(k_, px.p1);
            px.active = true;
          }
        }
        const int region = scene.labels0.at(x, y);
        ++region_pixels_[region];
        if (px.active) ++region_weighted_[region];
        fwd_[region].push_back(px);
      }
    }
    n_d0_ = n_d0;
    for (int r = 0; r < num_regions_; ++r) {
      if (region_weighted_[r] == 0) {
        throw EmptyRegion("dense_ba: region " + std::to_string(r) +
                          " has no weighted pixel");
      }
      for (std::size_t i = 0; i < fwd_[r].size(); ++i) fwd_flat_.emplace_back(r, i);
    }

    d1_full_ = scene.d1;
    if (params_.bidirectional) {
      int n_d1 = 0;
      for (int y = 0; y < k_.height; ++y) {
        for (int x = 0; x < k_.width; ++x) {
          const double d = scene.d1.at(x, y);
          if (!std::isfinite(d) || d <= 0.0) continue;
          if (!(w_bwd_.at(x, y) > 0.0)) continue;
          const Vec2 p0(x + scene.flow_bwd.du(x, y), y + scene.flow_bwd.dv(x, y));
          if (!in_image(k_.width, k_.height, p0.x(), p0.y())) continue;
          // membership in the static region via the backtracked frame-0 label
          const int lx = static_cast<int>(std::lround(p0.x()));
          const int ly = static_cast<int>(std::lround(p0.y()));
          if (scene.labels0.at(std::clamp(lx, 0, k_.width - 1),
                               std::clamp(ly, 0, k_.height - 1)) != 0) {
            continue;
          }
          const double d0s = sample_bilinear(scene.d0, p0.x(), p0.y());
          if (!std::isfinite(d0s) || d0s <= 0.0) continue;
          BwdPixel px;
          px.x = x;
          px.y = y;
          px.depth_idx = n_d1++;
          depth1_index_[static_cast<std::size_t>(y) * k_.width + x] = px.depth_idx;
          px.w = w_bwd_.at(x, y);
          px.p0 = p0;
          px.ray1 = pixel_ray(k_, Pixel(x, y));
          px.ray0 = pixel_ray(k_, p0);
          px.d1 = d;
          px.d0s = d0s;
          d1_init_.push_back(d);
          bwd_.push_back(px);
        }
      }
      n_d1_ = n_d1;
    }

    ss_offset_ = 9 * static_cast<std::size_t>(num_regions_);
    d0_offset_ = ss_offset_ + 4;
    d1_offset_ = d0_offset_ + n_d0_;
    total_params_ = d1_offset_ + n_d1_;
  }

  void check_region(int region) const {
    if (region < 0 || region >= num_regions_) {
      throw UnknownRegion("dense_ba: no region " + std::to_string(region));
    }
    if (fwd_[region].empty() || region_weighted_[region] == 0) {
      throw EmptyRegion("dense_ba: region " + std::to_string(region) +
                        " has no weighted pixel");
    }
  }

  static std::string worst_term(const BATermLosses& t) {
    if (!std::isfinite(t.reproj_fwd)) return "forward reprojection loss";
    if (!std::isfinite(t.depth_fwd)) return "forward depth regularization";
    if (!std::isfinite(t.reproj_bwd)) return "backward reprojection loss";
    if (!std::isfinite(t.depth_bwd)) return "backward depth regularization";
    return "total loss";
  }

  /// Forward terms of fwd_[region][b..e). lam1/lam2 scale the gradients and
  /// smoothed sums of the reprojection / depth terms respectively (pass 1,0
  /// or 0,1 to isolate a term). When shared9 is non-null, pose and
  /// scale/shift gradients go there (layout as the head of the parameter
  /// vector) instead of `grad`; depth gradients always go to `grad`.
  void eval_region_range(std::span<const double> state, int region, std::size_t b,
                         std::size_t e, std::span<double> grad, double lam1,
                         double lam2, double* h_reproj, double* l_reproj,
                         double* h_depth, double* l_depth,
                         double* shared9 = nullptr) const {
    const double* q = &state[pose_offset(region)];
    const Rot6d rot{Vec3(q[0], q[1], q[2]), Vec3(q[3], q[4], q[5])};
    const Mat3 r = rot6d_to_matrix(rot);
    const Vec3 t(q[6], q[7], q[8]);
    const double theta0 = state[ss_offset_], gamma0 = state[ss_offset_ + 1];
    const double theta1 = state[ss_offset_ + 2], gamma1 = state[ss_offset_ + 3];
    const bool want_grad = !grad.empty();

    Mat3 d_r = Mat3::Zero();
    Vec3 d_t = Vec3::Zero();
    double d_t0 = 0.0, d_g0 = 0.0, d_t1 = 0.0, d_g1 = 0.0;

    for (std::size_t i = b; i < e; ++i) {
      const FwdPixel& px = fwd_[region][i];
      const double logd = state[d0_offset_ + px.depth_idx];
      const double dhat = std::exp(logd);
      double d_logd = 0.0;

      // depth prior: |D^0 - (theta0 D0 + gamma0)|
      {
        const double res = dhat - (theta0 * px.d0 + gamma0);
        if (h_depth) *h_depth += smooth_l1(res, params_.huber_depth);
        if (l_depth) *l_depth += std::abs(res);
        if (want_grad && lam2 != 0.0) {
          const double g = lam2 * smooth_l1_grad(res, params_.huber_depth);
          d_logd += g * dhat;
          d_t0 -= g * px.d0;
          d_g0 -= g;
        }
      }

      if (px.active) {
        const Vec3 p0 = dhat * px.ray0;
        const Vec3 xc = r * p0 + t;
        Vec3 g_x = Vec3::Zero();

        // reprojection: pixels behind the camera contribute 0 with 0 gradient
        if (xc.z() > kMinProjectDepth) {
          const double iz = 1.0 / xc.z();
          const Vec2 res(k_.fx * xc.x() * iz + k_.cx - px.p1.x(),
                         k_.fy * xc.y() * iz + k_.cy - px.p1.y());
          if (h_reproj) {
            *h_reproj += px.w * (smooth_l1(res.x(), params_.huber_reproj) +
                                 smooth_l1(res.y(), params_.huber_reproj));
          }
          if (l_reproj) *l_reproj += px.w * (std::abs(res.x()) + std::abs(res.y()));
          if (want_grad && lam1 != 0.0) {
            const Vec2 du(px.w * lam1 * smooth_l1_grad(res.x(), params_.huber_reproj),
                          px.w * lam1 * smooth_l1_grad(res.y(), params_.huber_reproj));
            g_x.x() += du.x() * k_.fx * iz;
            g_x.y() += du.y() * k_.fy * iz;
            g_x.z() -= (du.x() * k_.fx * xc.x() + du.y() * k_.fy * xc.y()) * iz * iz;
          }
        }

        // cross-frame consistency: |T P^0 - (theta1 D1(p1) + gamma1) K^-1 p~1|
        {
          const Vec3 y = (theta1 * px.d1s + gamma1) * px.ray1;
          const Vec3 res = xc - y;
          double h = 0.0, l = 0.0;
          for (int cidx = 0; cidx < 3; ++cidx) {
            h += smooth_l1(res[cidx], params_.huber_depth);
            l += std::abs(res[cidx]);
          }
          if (h_depth) *h_depth += px.w * h;
          if (l_depth) *l_depth += px.w * l;
          if (want_grad && lam2 != 0.0) {
            Vec3 g3;
            for (int cidx = 0; cidx < 3; ++cidx) {
              g3[cidx] = px.w * lam2 * smooth_l1_grad(res[cidx], params_.huber_depth);
            }
            g_x += g3;
            const double gdot = g3.dot(px.ray1);
            d_t1 -= gdot * px.d1s;
            d_g1 -= gdot;
          }
        }

        if (want_grad && (g_x.x() != 0.0 || g_x.y() != 0.0 || g_x.z() != 0.0)) {
          d_t += g_x;
          d_r += g_x * p0.transpose();
          d_logd += (r.transpose() * g_x).dot(px.ray0) * dhat;
        }
      }

      if (want_grad) grad[d0_offset_ + px.depth_idx] += d_logd;
    }

    if (want_grad) {
      Vec3 da1 = Vec3::Zero(), da2 = Vec3::Zero();
      rot6d_backward(rot, d_r, &da1, &da2);
      double* dst = shared9 ? shared9 : grad.data();
      double* pq = dst + pose_offset(region);
      for (int a = 0; a < 3; ++a) {
        pq[a] += da1[a];
        pq[3 + a] += da2[a];
        pq[6 + a] += d_t[a];
      }
      double* ss = dst + ss_offset_;
      ss[0] += d_t0;
      ss[1] += d_g0;
      ss[2] += d_t1;
      ss[3] += d_g1;
    }
  }

  /// Backward (frame-1 -> frame-0) terms of the static region over
  /// bwd_[b..e): reprojection through the inverse camera motion plus the
  /// frame-1 depth prior and cross-frame consistency.
  void eval_backward_range(std::span<const double> state, std::size_t b,
                           std::size_t e, std::span<double> grad, double* h_reproj,
                           double* l_reproj, double* h_depth, double* l_depth,
                           double* shared9) const {
    const double* q = &state[pose_offset(0)];
    const Rot6d rot{Vec3(q[0], q[1], q[2]), Vec3(q[3], q[4], q[5])};
    const Mat3 r = rot6d_to_matrix(rot);
    const Vec3 t(q[6], q[7], q[8]);
    const double theta0 = state[ss_offset_], gamma0 = state[ss_offset_ + 1];
    const double theta1 = state[ss_offset_ + 2], gamma1 = state[ss_offset_ + 3];
    const bool want_grad = !grad.empty();

    Mat3 d_r = Mat3::Zero();
    Vec3 d_t = Vec3::Zero();
    double d_t0 = 0.0, d_g0 = 0.0, d_t1 = 0.0, d_g1 = 0.0;

    for (std::size_t i = b; i < e; ++i) {
      const BwdPixel& px = bwd_[i];
      const double logd = state[d1_offset_ + px.depth_idx];
      const double dhat = std::exp(logd);
      double d_logd = 0.0;

      // frame-1 depth prior
      {
        const double res = dhat - (theta1 * px.d1 + gamma1);
        if (h_depth) *h_depth += smooth_l1(res, params_.huber_depth);
        if (l_depth) *l_depth += std::abs(res);
        if (want_grad) {
          const double g = params_.lambda2 * smooth_l1_grad(res, params_.huber_depth);
          d_logd += g * dhat;
          d_t1 -= g * px.d1;
          d_g1 -= g;
        }
      }

      const Vec3 p1 = dhat * px.ray1;
      const Vec3 v = p1 - t;
      const Vec3 x0 = r.transpose() * v;
      Vec3 g_x0 = Vec3::Zero();

      if (x0.z() > kMinProjectDepth) {
        const double iz = 1.0 / x0.z();
        const Vec2 res(k_.fx * x0.x() * iz + k_.cx - px.p0.x(),
                       k_.fy * x0.y() * iz + k_.cy - px.p0.y());
        if (h_reproj) {
          *h_reproj += px.w * (smooth_l1(res.x(), params_.huber_reproj) +
                               smooth_l1(res.y(), params_.huber_reproj));
        }
        if (l_reproj) *l_reproj += px.w * (std::abs(res.x()) + std::abs(res.y()));
        if (want_grad) {
          const Vec2 du(
              px.w * params_.lambda1 * smooth_l1_grad(res.x(), params_.huber_reproj),
              px.w * params_.lambda1 * smooth_l1_grad(res.y(), params_.huber_reproj));
          g_x0.x() += du.x() * k_.fx * iz;
          g_x0.y() += du.y() * k_.fy * iz;
          g_x0.z() -= (du.x() * k_.fx * x0.x() + du.y() * k_.fy * x0.y()) * iz * iz;
        }
      }

      {
        const Vec3 y0 = (theta0 * px.d0s + gamma0) * px.ray0;
        const Vec3 res = x0 - y0;
        double h = 0.0, l = 0.0;
        for (int cidx = 0; cidx < 3; ++cidx) {
          h += smooth_l1(res[cidx], params_.huber_depth);
          l += std::abs(res[cidx]);
        }
        if (h_depth) *h_depth += px.w * h;
        if (l_depth) *l_depth += px.w * l;
        if (want_grad) {
          Vec3 g3;
          for (int cidx = 0; cidx < 3; ++cidx) {
            g3[cidx] = px.w * params_.lambda2 *
                       smooth_l1_grad(res[cidx], params_.huber_depth);
          }
          g_x0 += g3;
          const double gdot = g3.dot(px.ray0);
          d_t0 -= gdot * px.d0s;
          d_g0 -= gdot;
        }
      }

      if (want_grad && (g_x0.x() != 0.0 || g_x0.y() != 0.0 || g_x0.z() != 0.0)) {
        // x0 = R^T (p1 - t)
        const Vec3 dp1 = r * g_x0;
        d_t -= dp1;
        d_r += v * g_x0.transpose();
        d_logd += dp1.dot(px.ray1) * dhat;
      }

      if (want_grad) grad[d1_offset_ + px.depth_idx] += d_logd;
    }

    if (want_grad) {
      Vec3 da1 = Vec3::Zero(), da2 = Vec3::Zero();
      rot6d_backward(rot, d_r, &da1, &da2);
      double* pq = shared9 ? shared9 : grad.data();
      for (int a = 0; a < 3; ++a) {
        pq[a] += da1[a];
        pq[3 + a] += da2[a];
        pq[6 + a] += d_t[a];
      }
      double* ss = (shared9 ? shared9 : grad.data()) + ss_offset_;
      ss[0] += d_t0;
      ss[1] += d_g0;
      ss[2] += d_t1;
      ss[3] += d_g1;
    }
  }

  CameraIntrinsics k_;
  BAParams params_;
  int num_regions_;
  ScalarMap w_fwd_, w_bwd_;
  std::vector<std::vector<FwdPixel>> fwd_;
  std::vector<std::pair<int, std::size_t>> fwd_flat_;  // (region, index)
  std::vector<BwdPixel> bwd_;
  std::vector<double> d1_init_;
  ScalarMap d1_full_;
  std::vector<int> depth0_index_, depth1_index_;
  std::vector<int> region_pixels_, region_weighted_;
  int n_d0_ = 0, n_d1_ = 0;
  std::size_t ss_offset_ = 0, d0_offset_ = 0, d1_offset_ = 0, total_params_ = 0;
};

}  // namespace dynsplat
