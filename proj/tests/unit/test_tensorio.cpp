// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dynsplat/io/manifest.hpp"
#include "support/testutil.hpp"

using namespace dynsplat;
namespace fs = std::filesystem;

namespace {

ScalarMap random_scalar_map(int w, int h, Rng& rng) {
  ScalarMap m(w, h);
  for (double& v : m.data) v = static_cast<float>(rng.uniform(-4.0, 4.0));
  return m;
}

/// Minimal scene on disk; returns the manifest path.
std::string write_scene(const std::string& dir, int w, int h,
                        const std::vector<int>& label_values = {0}) {
  RgbImage img(w, h, 0.25);
  write_png(dir + "/i0.png", img);
  write_png(dir + "/i1.png", img);
  ScalarMap d(w, h, 2.0);
  write_pfm(dir + "/d0.pfm", d);
  write_pfm(dir + "/d1.pfm", d);
  FlowMap f(w, h);
  write_flo(dir + "/fwd.flo", f);
  write_flo(dir + "/bwd.flo", f);
  LabelMap labels(w, h, 0);
  for (std::size_t i = 0; i < labels.data.size(); ++i) {
    labels.data[i] = label_values[i % label_values.size()];
  }
  write_pgm16(dir + "/labels.pgm", labels);

  json j = {
      {"intrinsics",
       {{"fx", 100.0}, {"fy", 100.0}, {"cx", w / 2.0}, {"cy", h / 2.0},
        {"width", w}, {"height", h}}},
      {"frames",
       {{"i0", "i0.png"}, {"i1", "i1.png"}, {"d0", "d0.pfm"}, {"d1", "d1.pfm"},
        {"flow_fwd", "fwd.flo"}, {"flow_bwd", "bwd.flo"}, {"labels", "labels.pgm"}}}};
  const std::string path = dir + "/manifest.json";
  std::ofstream(path) << j.dump(2);
  return path;
}

}  // namespace

TEST_CASE("pfm round trip is bit identical") {
  const std::string dir = testutil::temp_dir("pfm");
  Rng rng(11);
  const ScalarMap m = random_scalar_map(16, 16, rng);
  write_pfm(dir + "/a.pfm", m);
  const ScalarMap back = read_pfm(dir + "/a.pfm");
  REQUIRE(back.width == 16);
  REQUIRE(back.height == 16);
  CHECK(back.data == m.data);
}

TEST_CASE("pfm rejects color and garbage files") {
  const std::string dir = testutil::temp_dir("pfm_bad");
  std::ofstream(dir + "/color.pfm") << "PF\n4 4\n-1.0\n";
  CHECK_THROWS_AS(read_pfm(dir + "/color.pfm"), UnsupportedFormat);
  std::ofstream(dir + "/junk.pfm") << "hello world";
  CHECK_THROWS_AS(read_pfm(dir + "/junk.pfm"), CorruptHeader);
  CHECK_THROWS_AS(read_pfm(dir + "/absent.pfm"), MissingFile);
}

TEST_CASE("flo round trip and header validation") {
  const std::string dir = testutil::temp_dir("flo");
  Rng rng(13);
  FlowMap f(9, 7);
  for (double& v : f.data) v = static_cast<float>(rng.uniform(-20.0, 20.0));
  write_flo(dir + "/a.flo", f);
  const FlowMap back = read_flo(dir + "/a.flo");
  CHECK(back.data == f.data);

  // header dims larger than payload
  {
    std::ofstream out(dir + "/bad.flo", std::ios::binary);
    const float magic = 202021.25f;
    const std::int32_t w = 100, h = 100;
    out.write(reinterpret_cast<const char*>(&magic), 4);
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&h), 4);
    const float payload[4] = {0, 0, 0, 0};
    out.write(reinterpret_cast<const char*>(payload), 16);
  }
  CHECK_THROWS_AS(read_flo(dir + "/bad.flo"), CorruptHeader);
}

TEST_CASE("pgm16 round trip") {
  const std::string dir = testutil::temp_dir("pgm");
  LabelMap m(8, 5);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = static_cast<int>(i % 7);
  write_pgm16(dir + "/a.pgm", m);
  const LabelMap back = read_pgm16(dir + "/a.pgm");
  CHECK(back.data == m.data);
}

TEST_CASE("png round trip stays within 8-bit quantization") {
  const std::string dir = testutil::temp_dir("png");
  Rng rng(7);
  RgbImage img(12, 10);
  for (double& v : img.data) v = rng.uniform(0.0, 1.0);
  write_png(dir + "/a.png", img);
  const RgbImage back = read_png(dir + "/a.png");
  REQUIRE(back.width == img.width);
  double max_err = 0.0;
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    max_err = std::max(max_err, std::abs(back.data[i] - img.data[i]));
  }
  CHECK(max_err <= 1.0 / 255.0 + 1e-12);
}

TEST_CASE("manifest loads a coherent scene") {
  const std::string dir = testutil::temp_dir("manifest_ok");
  const std::string path = write_scene(dir, 16, 16);
  const SceneData s = load_manifest(path);
  CHECK(s.num_regions == 1);
  CHECK(s.i0.width == 16);
  CHECK(s.relabel_map.empty());
}

TEST_CASE("manifest rejects mismatched raster dimensions") {
  const std::string dir = testutil::temp_dir("manifest_dims");
  const std::string path = write_scene(dir, 16, 16);
  write_pfm(dir + "/d0.pfm", ScalarMap(8, 8, 1.0));
  try {
    load_manifest(path);
    FAIL("expected DimensionMismatch");
  } catch (const DimensionMismatch& e) {
    CHECK(std::string(e.what()).find("d0") != std::string::npos);
  }
}

TEST_CASE("manifest names missing files") {
  const std::string dir = testutil::temp_dir("manifest_missing");
  const std::string path = write_scene(dir, 8, 8);
  fs::remove(dir + "/bwd.flo");
  try {
    load_manifest(path);
    FAIL("expected MissingFile");
  } catch (const MissingFile& e) {
    CHECK(std::string(e.what()).find("bwd.flo") != std::string::npos);
  }
}

TEST_CASE("manifest rejects malformed documents") {
  const std::string dir = testutil::temp_dir("manifest_bad");
  const std::string path = dir + "/manifest.json";
  std::ofstream(path) << "{ not json";
  CHECK_THROWS_AS(load_manifest(path), MalformedManifest);
  std::ofstream(path) << R"({"intrinsics": {"fx": 1}})";
  CHECK_THROWS_AS(load_manifest(path), MalformedManifest);
}

TEST_CASE("sparse labels are compacted and the mapping reported") {
  const std::string dir = testutil::temp_dir("manifest_relabel");
  const std::string path = write_scene(dir, 8, 8, {0, 2});
  const SceneData s = load_manifest(path);
  CHECK(s.num_regions == 2);
  REQUIRE(s.relabel_map.size() == 2);
  CHECK(s.relabel_map[1] == std::pair<int, int>{2, 1});
  CHECK(s.labels0.num_regions() == 2);
}
