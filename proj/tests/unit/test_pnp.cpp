// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "dynsplat/pnp/pnp.hpp"
#include "support/testutil.hpp"

using namespace dynsplat;

namespace {

const CameraIntrinsics kCam{120.0, 120.0, 32.0, 32.0, 64, 64};

/// Random non-coplanar cloud in front of the camera.
std::vector<Point3> random_cloud(Rng& rng, int n) {
  std::vector<Point3> pts;
  pts.reserve(n);
  for (int i = 0; i < n; ++i) {
    pts.emplace_back(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5),
                     rng.uniform(3.0, 8.0));
  }
  return pts;
}

RegionCorrespondences forward_model(const std::vector<Point3>& pts, const SE3& t) {
  RegionCorrespondences c;
  c.region_id = 1;
  const Mat3 r = t.rotation_matrix();
  for (const Point3& p : pts) {
    c.points3d.push_back(p);
    c.pixels1.push_back(project(kCam, r * p + t.translation));
    c.weights.push_back(1.0);
  }
  return c;
}

}  // namespace

TEST_CASE("build_region_correspondences filters by weight, depth, bounds") {
  const int w = 10, h = 10;
  LabelMap labels(w, h, 1);
  ScalarMap d0(w, h, 2.0);
  FlowMap flow(w, h);
  ScalarMap wts(w, h, 0.0);
  CameraIntrinsics k{100.0, 100.0, 5.0, 5.0, w, h};

  SUBCASE("all weights zero is an empty region") {
    CHECK_THROWS_AS(build_region_correspondences(1, labels, d0, flow, wts, k),
                    EmptyRegion);
  }

  SUBCASE("single valid pixel on the optical axis") {
    wts.at(5, 5) = 1.0;
    const auto c = build_region_correspondences(1, labels, d0, flow, wts, k);
    REQUIRE(c.points3d.size() == 1);
    CHECK((c.points3d[0] - Point3(0, 0, 2)).norm() == 0.0);
    CHECK((c.pixels1[0] - Pixel(5, 5)).norm() == 0.0);
  }

  SUBCASE("exactly the weighted pixels survive") {
    int on = 0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if ((x + y) % 5 == 0) {
          wts.at(x, y) = 1.0;
          ++on;
        }
      }
    }
    const auto c = build_region_correspondences(1, labels, d0, flow, wts, k);
    CHECK(static_cast<int>(c.points3d.size()) == on);
  }

  SUBCASE("NaN depth and out-of-bounds tracks are dropped") {
    wts.at(5, 5) = wts.at(6, 6) = wts.at(7, 7) = 1.0;
    d0.at(5, 5) = std::numeric_limits<double>::quiet_NaN();
    flow.du(6, 6) = 100.0;
    const auto c = build_region_correspondences(1, labels, d0, flow, wts, k);
    CHECK(c.points3d.size() == 1);
  }
}

TEST_CASE("pnp_solve recovers poses from noiseless forward models") {
  Rng rng(31);
  SUBCASE("identity motion") {
    const auto c = forward_model(random_cloud(rng, 40), SE3::identity());
    const SE3 t = pnp_solve(c, kCam);
    CHECK(testutil::rotation_error_rad(t.rotation_matrix(), Mat3::Identity()) < 1e-6);
    CHECK(t.translation.norm() < 1e-6);
  }
  SUBCASE("random motions") {
    for (int i = 0; i < 10; ++i) {
      const SE3 gt = testutil::random_se3(rng, 0.3, 0.2);
      const auto c = forward_model(random_cloud(rng, 60), gt);
      const SE3 t = pnp_solve(c, kCam);
      CHECK(testutil::rotation_error_rad(t.rotation_matrix(), gt.rotation_matrix()) < 1e-4);
      CHECK((t.translation - gt.translation).norm() < 1e-4);
    }
  }
}

TEST_CASE("pnp_solve needs at least six pairs") {
  Rng rng(37);
  auto c = forward_model(random_cloud(rng, 5), SE3::identity());
  CHECK_THROWS_AS(pnp_solve(c, kCam), DegenerateConfiguration);
}

TEST_CASE("coplanar points are a degenerate configuration") {
  Rng rng(43);
  std::vector<Point3> pts;
  for (int i = 0; i < 30; ++i) {
    pts.emplace_back(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), 5.0);
  }
  const auto c = forward_model(pts, SE3::identity());
  CHECK_THROWS_AS(pnp_solve(c, kCam), DegenerateConfiguration);
}

TEST_CASE("ransac_pnp on noiseless data marks every pair inlier") {
  Rng rng(47);
  const SE3 gt = testutil::random_se3(rng, 0.2, 0.3);
  const auto c = forward_model(random_cloud(rng, 80), gt);
  RansacParams params;
  params.seed = 9;
  params.max_iters = 100;
  const RansacResult res = ransac_pnp(c, kCam, params);
  CHECK(res.inlier_count == 80);
  CHECK(testutil::rotation_error_deg(res.transform, gt) < 1e-4);
}

TEST_CASE("ransac_pnp rejects 30 percent outliers") {
  Rng rng(53);
  const SE3 gt = testutil::random_se3(rng, 0.2, 0.3);
  auto c = forward_model(random_cloud(rng, 200), gt);
  Rng corrupt(999);
  std::vector<bool> is_outlier(c.pixels1.size(), false);
  for (std::size_t i = 0; i < c.pixels1.size(); ++i) {
    if (corrupt.uniform() < 0.3) {
      c.pixels1[i] = Pixel(corrupt.uniform(0.0, 63.0), corrupt.uniform(0.0, 63.0));
      is_outlier[i] = true;
    }
  }
  RansacParams params;
  params.seed = 4;
  const RansacResult res = ransac_pnp(c, kCam, params);
  CHECK(testutil::rotation_error_deg(res.transform, gt) < 0.1);
  const Mat3 r = res.transform.rotation_matrix();
  for (std::size_t i = 0; i < is_outlier.size(); ++i) {
    if (is_outlier[i]) {
      // an outlier may only stay "inlier" if it happens to reproject well
      const double e = detail::reproj_error(res.transform, kCam, c.points3d[i],
                                            c.pixels1[i], r);
      if (res.inliers[i]) CHECK(e < params.threshold);
    }
    if (res.inliers[i]) {
      CHECK(detail::reproj_error(res.transform, kCam, c.points3d[i], c.pixels1[i], r) <
            params.threshold);
    }
  }
}

TEST_CASE("ransac_pnp is deterministic per seed") {
  Rng rng(61);
  const SE3 gt = testutil::random_se3(rng, 0.2, 0.3);
  auto c = forward_model(random_cloud(rng, 100), gt);
  Rng corrupt(5);
  for (std::size_t i = 0; i < c.pixels1.size(); i += 4) {
    c.pixels1[i] = Pixel(corrupt.uniform(0.0, 63.0), corrupt.uniform(0.0, 63.0));
  }
  RansacParams params;
  params.seed = 77;
  const RansacResult a = ransac_pnp(c, kCam, params);
  const RansacResult b = ransac_pnp(c, kCam, params);
  CHECK(a.transform.rotation.a1 == b.transform.rotation.a1);
  CHECK(a.transform.rotation.a2 == b.transform.rotation.a2);
  CHECK(a.transform.translation == b.transform.translation);
  CHECK(a.inliers == b.inliers);
}

TEST_CASE("ransac_pnp refuses undersized problems") {
  Rng rng(67);
  const auto c = forward_model(random_cloud(rng, 10), SE3::identity());
  RansacParams params;
  params.min_inliers = 20;
  CHECK_THROWS_AS(ransac_pnp(c, kCam, params), InsufficientInliers);
}

TEST_CASE("pnp is equivariant under camera-frame rotations") {
  Rng rng(71);
  const SE3 gt = testutil::random_se3(rng, 0.2, 0.2);
  const auto pts = random_cloud(rng, 50);
  const auto c = forward_model(pts, gt);
  const SE3 t0 = pnp_solve(c, kCam);

  // Rotate the world by Q: points QX, observations of (Q T Q^-1).
  const Mat3 q = testutil::random_rotation(rng, 0.2);
  RegionCorrespondences c2;
  c2.region_id = 1;
  const Mat3 r = gt.rotation_matrix();
  for (const Point3& p : pts) {
    c2.points3d.push_back(q * p);
    c2.pixels1.push_back(project(kCam, q * (r * p + gt.translation)));
    c2.weights.push_back(1.0);
  }
  const SE3 t2 = pnp_solve(c2, kCam);
  const Mat3 expected = q * t0.rotation_matrix() * q.transpose();
  CHECK((t2.rotation_matrix() - expected).cwiseAbs().maxCoeff() < 1e-5);
  CHECK((t2.translation - q * t0.translation).cwiseAbs().maxCoeff() < 1e-5);
}
