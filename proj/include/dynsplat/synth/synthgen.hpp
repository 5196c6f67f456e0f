// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <vector>

#include "dynsplat/core/rng.hpp"
#include "dynsplat/field/motion_field.hpp"
#include "dynsplat/io/manifest.hpp"
#include "dynsplat/splat/rasterizer.hpp"

namespace dynsplat {

/// Deterministic perturbations applied to the inputs after exact generation.
/// The ground-truth block is never touched.
struct NoiseSpec {
  double depth_noise = 0.0;        // lognormal sigma (multiplicative)
  double flow_noise = 0.0;         // additive Gaussian, pixels
  int mask_erosion = 0;            // px; negative dilates
  double flow_dropout_frac = 0.0;  // fraction of forward-flow pixels corrupted
  double flow_dropout_mag = 8.0;   // px, uniform corruption magnitude
  // affine miscalibration of the "monocular" depth inputs
  double d0_scale = 1.0, d0_shift = 0.0;
  double d1_scale = 1.0, d1_shift = 0.0;

  bool is_zero() const {
    return depth_noise == 0.0 && flow_noise == 0.0 && mask_erosion == 0 &&
           flow_dropout_frac == 0.0 && d0_scale == 1.0 && d0_shift == 0.0 &&
           d1_scale == 1.0 && d1_shift == 0.0;
  }
};

struct SynthObjectConfig {
  int blob_count = 140;
  double radius = 0.55;
};

struct SynthConfig {
  int width = 64, height = 64;
  int num_objects = 1;
  std::vector<SynthObjectConfig> objects;  // padded to num_objects
  double cam_rotation_deg = 1.2;
  double cam_translation = 0.12;   // scene units
  double obj_rotation_deg = 3.0;
  double obj_translation = 0.45;   // scene units
  double mid_ratio = 0.5;
  std::uint64_t seed = 0;
  NoiseSpec noise;
};

/// One generated scene: exact rasters, rendered images, and the ground truth.
struct OracleBundle {
  SceneData scene;  // in-memory; manifest paths filled on save
  RgbImage i_mid;   // evaluation view at cfg.mid_ratio
  OracleData gt;
  SynthConfig cfg;
};

namespace detail {

struct SynthSphere {
  Vec3 center;
  double radius = 0.0;
  int region = 0;          // 0 = background dome
  SE3 motion;              // world t0 -> t1 (identity for the dome)
  // smooth procedural texture
  Vec3 base_color;
  Vec3 freq[3];
  Vec3 phase;

  Vec3 color_at(const Vec3& p) const {
    Vec3 c;
    for (int ch = 0; ch < 3; ++ch) {
      c[ch] = base_color[ch] + 0.28 * std::cos(freq[ch].dot(p) + phase[ch]);
    }
    return c.cwiseMax(0.04).cwiseMin(0.96);
  }
};

/// Nearest positive ray-sphere intersection parameter, or nullopt.
inline std::optional<double> ray_sphere(const Vec3& origin, const Vec3& dir,
                                        const Vec3& center, double radius) {
  const Vec3 oc = origin - center;
  const double a = dir.squaredNorm();
  const double b = 2.0 * oc.dot(dir);
  const double c = oc.squaredNorm() - radius * radius;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  const double t0 = (-b - sq) / (2.0 * a);
  const double t1 = (-b + sq) / (2.0 * a);
  if (t0 > 1e-9) return t0;
  if (t1 > 1e-9) return t1;
  return std::nullopt;
}

inline Vec3 random_texture_freq(Rng& rng, double scale) {
  return scale * Vec3(rng.uniform(0.6, 1.4), rng.uniform(0.6, 1.4),
                      rng.uniform(0.6, 1.4));
}

}  // namespace detail

/// Generates a piecewise-rigid two-view scene: a static background dome plus
/// textured Gaussian-blob spheres, each moving rigidly. Images come from the
/// splatting renderer under the ground-truth poses; depth, flow, and labels
/// come from exact ray casting against the same surfaces, so unprojecting a
/// pixel with the emitted depth, applying its region's motion, and projecting
/// into the other frame reproduces the emitted flow exactly.
inline OracleBundle generate(const SynthConfig& cfg_in) {
  SynthConfig cfg = cfg_in;
  cfg.objects.resize(cfg.num_objects, cfg.objects.empty()
                                          ? SynthObjectConfig{}
                                          : cfg.objects.back());
  OracleBundle bundle;
  bundle.cfg = cfg;
  const int w = cfg.width, h = cfg.height;
  CameraIntrinsics k{1.4 * w, 1.4 * w, w / 2.0, h / 2.0, w, h};

  Rng layout_rng(seed_combine(cfg.seed, "synth_layout"));

  // ground-truth camera: view transform of frame 1
  SE3 v1 = SE3::identity();
  {
    Vec3 axis(layout_rng.normal(), layout_rng.normal(), layout_rng.normal());
    if (axis.norm() < 1e-9) axis = Vec3(0, 1, 0);
    axis.normalize();
    const double angle = cfg.cam_rotation_deg * M_PI / 180.0;
    Vec6 xi = Vec6::Zero();
    xi.tail<3>() = axis * angle;
    Vec3 tdir(layout_rng.normal(), layout_rng.normal(), 0.35 * layout_rng.normal());
    if (tdir.norm() < 1e-9) tdir = Vec3(1, 0, 0);
    tdir.normalize();
    v1 = SE3::from_matrix(se3_exp(xi).rotation_matrix(),
                          cfg.cam_translation * tdir);
  }

  // surfaces: background dome + object spheres
  const double z_bg = 7.0, r_bg = 10.0;
  std::vector<detail::SynthSphere> spheres;
  {
    detail::SynthSphere bg;
    bg.center = Vec3(0, 0, z_bg + r_bg);
    bg.radius = r_bg;
    bg.region = 0;
    Rng tex(seed_combine(cfg.seed, "tex_bg"));
    bg.base_color = Vec3(tex.uniform(0.35, 0.6), tex.uniform(0.35, 0.6),
                         tex.uniform(0.35, 0.6));
    for (int c = 0; c < 3; ++c) bg.freq[c] = detail::random_texture_freq(tex, 1.6);
    bg.phase = Vec3(tex.uniform(0, 6.28), tex.uniform(0, 6.28), tex.uniform(0, 6.28));
    spheres.push_back(bg);
  }
  for (int obj = 0; obj < cfg.num_objects; ++obj) {
    detail::SynthSphere s;
    s.radius = cfg.objects[obj].radius;
    s.region = obj + 1;
    const double z = layout_rng.uniform(3.4, 4.6);
    const double px = (obj % 2 == 0 ? 0.40 : 0.62) * w + layout_rng.uniform(-2.0, 2.0);
    const double py = layout_rng.uniform(0.42, 0.58) * h;
    s.center = unproject(k, Pixel(px, py), z);

    Vec3 axis(layout_rng.normal(), layout_rng.normal(), layout_rng.normal());
    if (axis.norm() < 1e-9) axis = Vec3(0, 0, 1);
    axis.normalize();
    const double angle = cfg.obj_rotation_deg * M_PI / 180.0;
    Vec6 xi = Vec6::Zero();
    xi.tail<3>() = axis * angle;
    const Mat3 r_obj = se3_exp(xi).rotation_matrix();
    Vec3 tdir(layout_rng.normal(), layout_rng.normal(), 0.25 * layout_rng.normal());
    if (tdir.norm() < 1e-9) tdir = Vec3(1, 0, 0);
    tdir.normalize();
    // rotation about the object's own center plus a shift
    s.motion = SE3::from_matrix(
        r_obj, s.center - r_obj * s.center + cfg.obj_translation * tdir);

    Rng tex(seed_combine(seed_combine(cfg.seed, "tex_obj"), obj));
    s.base_color = Vec3(tex.uniform(0.25, 0.75), tex.uniform(0.25, 0.75),
                        tex.uniform(0.25, 0.75));
    for (int c = 0; c < 3; ++c) s.freq[c] = detail::random_texture_freq(tex, 7.0);
    s.phase = Vec3(tex.uniform(0, 6.28), tex.uniform(0, 6.28), tex.uniform(0, 6.28));
    spheres.push_back(s);
  }

  // feasibility: every object stays inside the frame at t0, mid, t1
  for (const auto& s : spheres) {
    if (s.region == 0) continue;
    for (const double t : {0.0, cfg.mid_ratio, 1.0}) {
      const SE3 cam_t = se3_interpolate(v1, t);
      const SE3 motion_t = se3_interpolate(s.motion, t);
      const Vec3 c_cam = se3_apply(cam_t, se3_apply(motion_t, s.center));
      if (c_cam.z() < 1.0) {
        throw ConfigInfeasible("synthgen: object " + std::to_string(s.region) +
                               " too close to the camera");
      }
      const Pixel p = project(k, c_cam);
      const double rad_px = k.fx * s.radius / c_cam.z();
      if (p.x() - rad_px < 1.0 || p.x() + rad_px > w - 2.0 || p.y() - rad_px < 1.0 ||
          p.y() + rad_px > h - 2.0) {
        throw ConfigInfeasible("synthgen: object " + std::to_string(s.region) +
                               " leaves the frame at ratio " + std::to_string(t));
      }
    }
  }

  // ground-truth gaussians: background sampled on an over-sized pixel grid,
  // objects sampled on their camera-facing hemisphere
  GaussianSet g;
  {
    const detail::SynthSphere& bg = spheres[0];
    const int margin = static_cast<int>(0.25 * w);
    for (int y = -margin; y < h + margin; ++y) {
      for (int x = -margin; x < w + margin; ++x) {
        const Vec3 dir = pixel_ray(k, Pixel(x, y));
        const auto t = detail::ray_sphere(Vec3::Zero(), dir, bg.center, bg.radius);
        if (!t) continue;
        const Vec3 p = *t * dir;
        const double sigma = p.z() / k.fx;
        g.append(p, quat_identity(), Vec3::Constant(std::log(sigma)), logit(0.95),
                 bg.color_at(p), 0);
      }
    }
    for (std::size_t si = 1; si < spheres.size(); ++si) {
      const detail::SynthSphere& s = spheres[si];
      Rng blob(seed_combine(seed_combine(cfg.seed, "blob"), si));
      const int count = cfg.objects[si - 1].blob_count;
      const Vec3 to_cam = -s.center.normalized();
      const double sigma = 2.1 * s.radius / std::sqrt(static_cast<double>(count));
      for (int i = 0; i < count; ++i) {
        Vec3 d(blob.normal(), blob.normal(), blob.normal());
        while (d.norm() < 1e-9) d = Vec3(blob.normal(), blob.normal(), blob.normal());
        d.normalize();
        if (d.dot(to_cam) < 0.0) d = -d;  // camera-facing hemisphere
        const Vec3 p = s.center + s.radius * d;
        g.append(p, quat_identity(), Vec3::Constant(std::log(sigma)), logit(0.96),
                 s.color_at(p), s.region);
      }
    }
  }

  // images at t = 0, 1, mid via the real renderer under GT motions
  std::vector<SE3> gt_motions;
  for (std::size_t si = 1; si < spheres.size(); ++si) {
    gt_motions.push_back(spheres[si].motion);
  }
  const MotionField gt_field = init_field(g, gt_motions);
  RenderConfig rcfg;
  const auto render_at = [&](double ratio) {
    const GaussianSet moved = apply_field(g, gt_field, ratio);
    const SE3 cam = se3_interpolate(v1, ratio);
    return rasterize(moved, nullptr, MotionMode::kNone, {}, cam, k, rcfg).image;
  };
  SceneData& scene = bundle.scene;
  scene.i0 = render_at(0.0);
  scene.i1 = render_at(1.0);
  bundle.i_mid = render_at(cfg.mid_ratio);

  // exact geometry rasters by ray casting
  scene.manifest.intrinsics = k;
  scene.num_regions = cfg.num_objects + 1;
  scene.d0 = ScalarMap(w, h);
  scene.d1 = ScalarMap(w, h);
  scene.flow_fwd = FlowMap(w, h);
  scene.flow_bwd = FlowMap(w, h);
  scene.labels0 = LabelMap(w, h, 0);

  const SE3 cam1_from_world = v1;
  const SE3 world_from_cam1 = se3_inverse(v1);
  const Mat3 r_wc1 = world_from_cam1.rotation_matrix();
  const Vec3 origin1 = world_from_cam1.translation;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // frame 0: rays from the world origin, surfaces at t0
      {
        const Vec3 dir = pixel_ray(k, Pixel(x, y));
        double best_z = std::numeric_limits<double>::infinity();
        int best_region = -1;
        Vec3 best_point = Vec3::Zero();
        for (const auto& s : spheres) {
          const auto t = detail::ray_sphere(Vec3::Zero(), dir, s.center, s.radius);
          if (!t) continue;
          const Vec3 p = *t * dir;
          if (p.z() < best_z) {
            best_z = p.z();
            best_region = s.region;
            best_point = p;
          }
        }
        scene.labels0.at(x, y) = std::max(best_region, 0);
        if (best_region < 0) {
          scene.d0.at(x, y) = std::numeric_limits<double>::quiet_NaN();
          scene.flow_fwd.du(x, y) = std::numeric_limits<double>::quiet_NaN();
          scene.flow_fwd.dv(x, y) = std::numeric_limits<double>::quiet_NaN();
        } else {
          scene.d0.at(x, y) = best_z;
          const SE3& m = spheres[best_region == 0 ? 0 : best_region].motion;
          const Vec3 moved = best_region == 0 ? best_point : se3_apply(m, best_point);
          const Pixel p1 = project(k, se3_apply(cam1_from_world, moved));
          scene.flow_fwd.du(x, y) = p1.x() - x;
          scene.flow_fwd.dv(x, y) = p1.y() - y;
        }
      }
      // frame 1: rays from the moved camera, surfaces at t1
      {
        const Vec3 dir = r_wc1 * pixel_ray(k, Pixel(x, y));
        double best_z = std::numeric_limits<double>::infinity();
        int best_region = -1;
        Vec3 best_point = Vec3::Zero();
        for (const auto& s : spheres) {
          const Vec3 center_t1 =
              s.region == 0 ? s.center : se3_apply(s.motion, s.center);
          const auto t = detail::ray_sphere(origin1, dir, center_t1, s.radius);
          if (!t) continue;
          const Vec3 p = origin1 + *t * dir;
          const double z_cam = se3_apply(cam1_from_world, p).z();
          if (z_cam < best_z) {
            best_z = z_cam;
            best_region = s.region;
            best_point = p;
          }
        }
        if (best_region < 0) {
          scene.d1.at(x, y) = std::numeric_limits<double>::quiet_NaN();
          scene.flow_bwd.du(x, y) = std::numeric_limits<double>::quiet_NaN();
          scene.flow_bwd.dv(x, y) = std::numeric_limits<double>::quiet_NaN();
        } else {
          scene.d1.at(x, y) = best_z;
          const Vec3 back =
              best_region == 0
                  ? best_point
                  : se3_apply(se3_inverse(spheres[best_region].motion), best_point);
          const Pixel p0 = project(k, back);
          scene.flow_bwd.du(x, y) = p0.x() - x;
          scene.flow_bwd.dv(x, y) = p0.y() - y;
        }
      }
    }
  }

  bundle.gt.t_cam = v1;
  bundle.gt.t_obj = gt_motions;
  bundle.gt.ratio = cfg.mid_ratio;
  scene.manifest.oracle = bundle.gt;
  return bundle;
}

/// Applies the noise spec to a copy of the bundle; the ground truth and the
/// evaluation view stay exact. Zero spec returns a bit-identical copy.
inline OracleBundle perturb(const OracleBundle& in, const NoiseSpec& noise,
                            std::uint64_t seed) {
  OracleBundle out = in;
  if (noise.is_zero()) return out;
  SceneData& s = out.scene;
  const int w = s.d0.width, h = s.d0.height;

  if (noise.depth_noise > 0.0) {
    Rng rng(seed_combine(seed, "depth_noise"));
    for (double& v : s.d0.data) {
      if (std::isfinite(v)) v *= std::exp(noise.depth_noise * rng.normal());
    }
    for (double& v : s.d1.data) {
      if (std::isfinite(v)) v *= std::exp(noise.depth_noise * rng.normal());
    }
  }
  if (noise.d0_scale != 1.0 || noise.d0_shift != 0.0) {
    for (double& v : s.d0.data) {
      if (std::isfinite(v)) v = noise.d0_scale * v + noise.d0_shift;
    }
  }
  if (noise.d1_scale != 1.0 || noise.d1_shift != 0.0) {
    for (double& v : s.d1.data) {
      if (std::isfinite(v)) v = noise.d1_scale * v + noise.d1_shift;
    }
  }
  if (noise.flow_noise > 0.0) {
    Rng rng(seed_combine(seed, "flow_noise"));
    for (double& v : s.flow_fwd.data) {
      if (std::isfinite(v)) v += noise.flow_noise * rng.normal();
    }
    for (double& v : s.flow_bwd.data) {
      if (std::isfinite(v)) v += noise.flow_noise * rng.normal();
    }
  }
  if (noise.flow_dropout_frac > 0.0) {
    Rng rng(seed_combine(seed, "flow_dropout"));
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (rng.uniform() < noise.flow_dropout_frac) {
          s.flow_fwd.du(x, y) +=
              rng.uniform(-noise.flow_dropout_mag, noise.flow_dropout_mag);
          s.flow_fwd.dv(x, y) +=
              rng.uniform(-noise.flow_dropout_mag, noise.flow_dropout_mag);
        }
      }
    }
  }
  for (int pass = 0; pass < std::abs(noise.mask_erosion); ++pass) {
    const LabelMap before = s.labels0;
    const bool erode = noise.mask_erosion > 0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto neighbor = [&](int dx, int dy) {
          const int nx = std::clamp(x + dx, 0, w - 1);
          const int ny = std::clamp(y + dy, 0, h - 1);
          return before.at(nx, ny);
        };
        if (erode) {
          const int v = before.at(x, y);
          if (v > 0 && (neighbor(-1, 0) != v || neighbor(1, 0) != v ||
                        neighbor(0, -1) != v || neighbor(0, 1) != v)) {
            s.labels0.at(x, y) = 0;
          }
        } else {
          if (before.at(x, y) == 0) {
            for (const auto [dx, dy] :
                 {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
              const int nv = neighbor(dx, dy);
              if (nv > 0) {
                s.labels0.at(x, y) = nv;
                break;
              }
            }
          }
        }
      }
    }
  }
  return out;
}

/// Writes the bundle to a directory in the standard formats plus a manifest
/// carrying the ground-truth block.
inline void save_bundle(const OracleBundle& bundle, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const SceneData& s = bundle.scene;
  write_png(dir + "/i0.png", s.i0);
  write_png(dir + "/i1.png", s.i1);
  write_png(dir + "/i_mid.png", bundle.i_mid);
  write_pfm(dir + "/d0.pfm", s.d0);
  write_pfm(dir + "/d1.pfm", s.d1);
  write_flo(dir + "/flow_fwd.flo", s.flow_fwd);
  write_flo(dir + "/flow_bwd.flo", s.flow_bwd);
  write_pgm16(dir + "/labels0.pgm", s.labels0);

  json oracle = {{"t_cam", se3_to_json(bundle.gt.t_cam)},
                 {"t_obj", json::array()},
                 {"ratio", bundle.gt.ratio}};
  for (const SE3& t : bundle.gt.t_obj) oracle["t_obj"].push_back(se3_to_json(t));
  const json manifest = {
      {"intrinsics",
       {{"fx", s.manifest.intrinsics.fx},
        {"fy", s.manifest.intrinsics.fy},
        {"cx", s.manifest.intrinsics.cx},
        {"cy", s.manifest.intrinsics.cy},
        {"width", s.manifest.intrinsics.width},
        {"height", s.manifest.intrinsics.height}}},
      {"frames",
       {{"i0", "i0.png"},
        {"i1", "i1.png"},
        {"d0", "d0.pfm"},
        {"d1", "d1.pfm"},
        {"flow_fwd", "flow_fwd.flo"},
        {"flow_bwd", "flow_bwd.flo"},
        {"labels", "labels0.pgm"}}},
      {"eval", {{"i_test", "i_mid.png"}}},
      {"oracle", oracle}};
  std::ofstream(dir + "/manifest.json") << manifest.dump(2) << "\n";
}

}  // namespace dynsplat
