// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>

#include "dynsplat/core/error.hpp"
#include "dynsplat/field/motion_field.hpp"
#include "dynsplat/geometry/camera.hpp"
#include "dynsplat/splat/gaussians.hpp"

namespace dynsplat {

/// Trained model: Gaussians + motion field + the refined frame-1 camera.
struct Checkpoint {
  CameraIntrinsics intrinsics;
  SE3 t_cam;
  GaussianSet gaussians;
  MotionField field;
};

namespace detail {

constexpr char kCheckpointMagic[8] = {'D', 'S', 'P', 'K', 'T', '0', '0', '1'};

template <class T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void read_raw(std::ifstream& in, T* v) {
  in.read(reinterpret_cast<char*>(v), sizeof(T));
}

}  // namespace detail

inline void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingFile("cannot write: " + path);
  out.write(detail::kCheckpointMagic, 8);
  detail::write_raw(out, ckpt.intrinsics.fx);
  detail::write_raw(out, ckpt.intrinsics.fy);
  detail::write_raw(out, ckpt.intrinsics.cx);
  detail::write_raw(out, ckpt.intrinsics.cy);
  detail::write_raw(out, static_cast<std::int32_t>(ckpt.intrinsics.width));
  detail::write_raw(out, static_cast<std::int32_t>(ckpt.intrinsics.height));
  for (int a = 0; a < 3; ++a) detail::write_raw(out, ckpt.t_cam.rotation.a1[a]);
  for (int a = 0; a < 3; ++a) detail::write_raw(out, ckpt.t_cam.rotation.a2[a]);
  for (int a = 0; a < 3; ++a) detail::write_raw(out, ckpt.t_cam.translation[a]);
  const auto n = static_cast<std::int64_t>(ckpt.gaussians.size());
  detail::write_raw(out, n);
  const GaussianSet& g = ckpt.gaussians;
  for (std::int64_t i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) detail::write_raw(out, g.positions[i][a]);
    for (int a = 0; a < 4; ++a) detail::write_raw(out, g.shape_rot[i][a]);
    for (int a = 0; a < 3; ++a) detail::write_raw(out, g.log_scales[i][a]);
    detail::write_raw(out, g.logit_opacity[i]);
    for (int a = 0; a < 3; ++a) detail::write_raw(out, g.color[i][a]);
    detail::write_raw(out, static_cast<std::int32_t>(g.region_id[i]));
    for (int a = 0; a < 3; ++a) detail::write_raw(out, ckpt.field.rot6[i].a1[a]);
    for (int a = 0; a < 3; ++a) detail::write_raw(out, ckpt.field.rot6[i].a2[a]);
    for (int a = 0; a < 3; ++a) detail::write_raw(out, ckpt.field.trans[i][a]);
  }
}

inline Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFile("checkpoint not found: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, detail::kCheckpointMagic, 8) != 0) {
    throw CorruptHeader("not a checkpoint file: " + path);
  }
  Checkpoint ckpt;
  detail::read_raw(in, &ckpt.intrinsics.fx);
  detail::read_raw(in, &ckpt.intrinsics.fy);
  detail::read_raw(in, &ckpt.intrinsics.cx);
  detail::read_raw(in, &ckpt.intrinsics.cy);
  std::int32_t w = 0, h = 0;
  detail::read_raw(in, &w);
  detail::read_raw(in, &h);
  ckpt.intrinsics.width = w;
  ckpt.intrinsics.height = h;
  for (int a = 0; a < 3; ++a) detail::read_raw(in, &ckpt.t_cam.rotation.a1[a]);
  for (int a = 0; a < 3; ++a) detail::read_raw(in, &ckpt.t_cam.rotation.a2[a]);
  for (int a = 0; a < 3; ++a) detail::read_raw(in, &ckpt.t_cam.translation[a]);
  std::int64_t n = 0;
  detail::read_raw(in, &n);
  if (!in || n < 0) throw CorruptHeader("bad checkpoint gaussian count: " + path);
  GaussianSet& g = ckpt.gaussians;
  for (std::int64_t i = 0; i < n; ++i) {
    Vec3 pos, ls, color, fa1, fa2, ft;
    Vec4 quat;
    double lo = 0.0;
    std::int32_t region = 0;
    for (int a = 0; a < 3; ++a) detail::read_raw(in, &pos[a]);
    for (int a = 0; a < 4; ++a) detail::read_raw(in, &quat[a]);
    for (int a = 0; a < 3; ++a) detail::read_raw(in, &ls[a]);
    detail::read_raw(in, &lo);
    for (int a = 0; a < 3; ++a) detail::read_raw(in, &color[a]);
    detail::read_raw(in, &region);
    for (int a = 0; a < 3; ++a) detail::read_raw(in, &fa1[a]);
    for (int a = 0; a < 3; ++a) detail::read_raw(in, &fa2[a]);
    for (int a = 0; a < 3; ++a) detail::read_raw(in, &ft[a]);
    if (!in) throw CorruptHeader("checkpoint truncated: " + path);
    g.append(pos, quat, ls, lo, color, region);
    ckpt.field.rot6.push_back({fa1, fa2});
    ckpt.field.trans.push_back(ft);
    ckpt.field.region_id.push_back(region);
  }
  return ckpt;
}

}  // namespace dynsplat
