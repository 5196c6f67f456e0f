// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynsplat/core/error.hpp"
#include "dynsplat/geometry/camera.hpp"
#include "dynsplat/geometry/se3.hpp"
#include "dynsplat/image/rasters.hpp"
#include "dynsplat/io/flo.hpp"
#include "dynsplat/io/pfm.hpp"
#include "dynsplat/io/pgm.hpp"
#include "dynsplat/io/png_io.hpp"

namespace dynsplat {

using json = nlohmann::json;

inline json se3_to_json(const SE3& t) {
  const Mat3 r = t.rotation_matrix();
  json jr = json::array();
  for (int i = 0; i < 3; ++i) {
    jr.push_back({r(i, 0), r(i, 1), r(i, 2)});
  }
  return {{"rotation", jr},
          {"translation", {t.translation.x(), t.translation.y(), t.translation.z()}}};
}

inline SE3 se3_from_json(const json& j) {
  Mat3 r;
  for (int i = 0; i < 3; ++i) {
    for (int c = 0; c < 3; ++c) r(i, c) = j.at("rotation").at(i).at(c).get<double>();
  }
  const auto& t = j.at("translation");
  return SE3::from_matrix(r, Vec3(t.at(0), t.at(1), t.at(2)));
}

/// Ground-truth block carried by synthetic scenes. t_cam is the world-to-
/// frame-1-camera view transform (world = frame-0 camera frame); t_obj are
/// world-frame t0->t1 motions of the dynamic regions, in region-id order.
struct OracleData {
  SE3 t_cam;
  std::vector<SE3> t_obj;
  double ratio = 0.5;
};

/// Declarative description of one two-view problem instance.
struct SceneManifest {
  CameraIntrinsics intrinsics;
  std::string i0, i1, d0, d1, flow_fwd, flow_bwd, labels;
  std::optional<std::string> i_test;
  std::optional<OracleData> oracle;
};

/// A fully loaded, cross-validated scene.
struct SceneData {
  SceneManifest manifest;
  RgbImage i0, i1;
  ScalarMap d0, d1;
  FlowMap flow_fwd, flow_bwd;
  LabelMap labels0;
  std::optional<RgbImage> i_test;
  int num_regions = 0;
  // old label -> new label, recorded when sparse ids were compacted
  std::vector<std::pair<int, int>> relabel_map;
};

namespace detail {

inline std::string require_string(const json& j, const char* section,
                                  const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw MalformedManifest(std::string("manifest: missing or non-string '") +
                            section + "." + key + "'");
  }
  return j.at(key).get<std::string>();
}

inline double require_number(const json& j, const char* section, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw MalformedManifest(std::string("manifest: missing or non-numeric '") +
                            section + "." + key + "'");
  }
  return j.at(key).get<double>();
}

template <class RasterT>
void check_dims(const RasterT& r, const CameraIntrinsics& k, const char* entry) {
  if (r.width != k.width || r.height != k.height) {
    throw DimensionMismatch(std::string("manifest entry '") + entry + "' is " +
                            std::to_string(r.width) + "x" + std::to_string(r.height) +
                            ", intrinsics say " + std::to_string(k.width) + "x" +
                            std::to_string(k.height));
  }
}

}  // namespace detail

inline SceneManifest parse_manifest_json(const json& j, const std::filesystem::path& base) {
  SceneManifest m;
  if (!j.contains("intrinsics") || !j.contains("frames")) {
    throw MalformedManifest("manifest: 'intrinsics' and 'frames' are required");
  }
  const json& ji = j.at("intrinsics");
  m.intrinsics.fx = detail::require_number(ji, "intrinsics", "fx");
  m.intrinsics.fy = detail::require_number(ji, "intrinsics", "fy");
  m.intrinsics.cx = detail::require_number(ji, "intrinsics", "cx");
  m.intrinsics.cy = detail::require_number(ji, "intrinsics", "cy");
  m.intrinsics.width = static_cast<int>(detail::require_number(ji, "intrinsics", "width"));
  m.intrinsics.height = static_cast<int>(detail::require_number(ji, "intrinsics", "height"));
  if (!m.intrinsics.valid()) {
    throw MalformedManifest("manifest: intrinsics violate fx,fy>0, 0<=cx<width, 0<=cy<height");
  }
  const json& jf = j.at("frames");
  auto resolve = [&base](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };
  m.i0 = resolve(detail::require_string(jf, "frames", "i0"));
  m.i1 = resolve(detail::require_string(jf, "frames", "i1"));
  m.d0 = resolve(detail::require_string(jf, "frames", "d0"));
  m.d1 = resolve(detail::require_string(jf, "frames", "d1"));
  m.flow_fwd = resolve(detail::require_string(jf, "frames", "flow_fwd"));
  m.flow_bwd = resolve(detail::require_string(jf, "frames", "flow_bwd"));
  m.labels = resolve(detail::require_string(jf, "frames", "labels"));
  if (j.contains("eval")) {
    m.i_test = resolve(detail::require_string(j.at("eval"), "eval", "i_test"));
  }
  if (j.contains("oracle")) {
    const json& jo = j.at("oracle");
    OracleData o;
    try {
      o.t_cam = se3_from_json(jo.at("t_cam"));
      for (const auto& jt : jo.at("t_obj")) o.t_obj.push_back(se3_from_json(jt));
      o.ratio = jo.value("ratio", 0.5);
    } catch (const json::exception& e) {
      throw MalformedManifest(std::string("manifest: bad oracle block: ") + e.what());
    }
    m.oracle = std::move(o);
  }
  return m;
}

/// Loads a manifest and all referenced rasters, cross-validating resolutions
/// and compacting sparse region ids to a contiguous {0..n}.
inline SceneData load_manifest(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw MissingFile("manifest not found: " + path);
  }
  std::ifstream in(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw MalformedManifest(std::string("manifest: invalid JSON: ") + e.what());
  }
  SceneData s;
  s.manifest = parse_manifest_json(j, std::filesystem::path(path).parent_path());
  const CameraIntrinsics& k = s.manifest.intrinsics;

  s.i0 = read_png(s.manifest.i0);
  detail::check_dims(s.i0, k, "i0");
  s.i1 = read_png(s.manifest.i1);
  detail::check_dims(s.i1, k, "i1");
  s.d0 = read_pfm(s.manifest.d0);
  detail::check_dims(s.d0, k, "d0");
  s.d1 = read_pfm(s.manifest.d1);
  detail::check_dims(s.d1, k, "d1");
  s.flow_fwd = read_flo(s.manifest.flow_fwd);
  detail::check_dims(s.flow_fwd, k, "flow_fwd");
  s.flow_bwd = read_flo(s.manifest.flow_bwd);
  detail::check_dims(s.flow_bwd, k, "flow_bwd");
  s.labels0 = read_pgm16(s.manifest.labels);
  detail::check_dims(s.labels0, k, "labels");
  if (s.manifest.i_test) {
    s.i_test = read_png(*s.manifest.i_test);
    detail::check_dims(*s.i_test, k, "eval.i_test");
  }

  // Compact sparse region ids. 0 stays the static background.
  std::map<int, int> remap;
  for (int v : s.labels0.data) remap.emplace(v, 0);
  if (!remap.count(0)) {
    throw MalformedManifest("manifest entry 'labels' has no static (0) pixels");
  }
  int next = 0;
  bool sparse = false;
  for (auto& [old_id, new_id] : remap) {
    new_id = next++;
    if (new_id != old_id) sparse = true;
  }
  if (sparse) {
    for (int& v : s.labels0.data) v = remap.at(v);
    for (const auto& [old_id, new_id] : remap) s.relabel_map.emplace_back(old_id, new_id);
  }
  s.num_regions = next;
  if (s.manifest.oracle &&
      static_cast<int>(s.manifest.oracle->t_obj.size()) != s.num_regions - 1) {
    throw MalformedManifest("manifest: oracle t_obj count does not match dynamic regions");
  }
  return s;
}

}  // namespace dynsplat
