// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "dynsplat/splat/rasterizer.hpp"
#include "support/gradcheck.hpp"
#include "support/testutil.hpp"

using namespace dynsplat;

namespace {

const CameraIntrinsics kCam{100.0, 100.0, 16.0, 16.0, 32, 32};

GaussianSet single_gaussian(const Vec3& pos, double scale, double opacity,
                            const Vec3& color, int region = 0) {
  GaussianSet g;
  g.append(pos, quat_identity(), Vec3::Constant(std::log(scale)), logit(opacity),
           color, region);
  return g;
}

}  // namespace

TEST_CASE("init_gaussians places one gaussian per valid pixel") {
  CameraIntrinsics k{100.0, 100.0, 1.0, 1.0, 2, 2};
  RgbImage img(2, 2, 0.5);
  ScalarMap depth(2, 2, 1.0);
  LabelMap labels(2, 2, 0);

  const GaussianSet g = init_gaussians(img, depth, labels, k, SE3::identity());
  REQUIRE(g.size() == 4);
  CHECK((g.positions[0] - unproject(k, {0, 0}, 1.0)).norm() == 0.0);
  CHECK((g.positions[3] - unproject(k, {1, 1}, 1.0)).norm() == 0.0);

  SUBCASE("NaN depth emits no gaussian") {
    depth.at(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK(init_gaussians(img, depth, labels, k, SE3::identity()).size() == 3);
  }
  SUBCASE("scale is the pixel footprint") {
    ScalarMap d2(2, 2, 2.0);
    const GaussianSet g2 = init_gaussians(img, d2, labels, k, SE3::identity());
    CHECK(std::exp(g2.log_scales[0][0]) == doctest::Approx(0.02));  // 2 * (1/100) * 1
  }
  SUBCASE("all-invalid depth is an error") {
    ScalarMap bad(2, 2, std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS_AS(init_gaussians(img, bad, labels, k, SE3::identity()),
                    NoValidPixels);
  }
}

TEST_CASE("project_gaussian closed forms") {
  SUBCASE("isotropic on-axis footprint") {
    const double sigma = 0.05, z = 2.0;
    const GaussianSet g = single_gaussian({0, 0, z}, sigma, 0.8, {1, 0, 0});
    const auto p = project_gaussian(g, 0, kCam, SE3::identity());
    REQUIRE(p.valid);
    const double expected = std::pow(kCam.fx * sigma / z, 2) + kCovarianceDilation;
    CHECK(p.cov_a == doctest::Approx(expected).epsilon(1e-9));
    CHECK(p.cov_c == doctest::Approx(expected).epsilon(1e-9));
    CHECK(std::abs(p.cov_b) < 1e-12);
    CHECK((p.mean2d - Vec2(16, 16)).norm() < 1e-12);
    CHECK(p.depth == z);
  }
  SUBCASE("behind the near plane is clipped") {
    const GaussianSet g = single_gaussian({0, 0, 0.005}, 0.01, 0.8, {1, 0, 0});
    CHECK_FALSE(project_gaussian(g, 0, kCam, SE3::identity()).valid);
  }
  SUBCASE("doubling scales quadruples the covariance minus dilation") {
    GaussianSet g = single_gaussian({0.1, -0.2, 3.0}, 0.04, 0.8, {1, 0, 0});
    g.shape_rot[0] = Vec4(0.9, 0.3, -0.2, 0.1).normalized();
    g.log_scales[0] = Vec3(std::log(0.03), std::log(0.08), std::log(0.05));
    const auto p1 = project_gaussian(g, 0, kCam, SE3::identity());
    g.log_scales[0] += Vec3::Constant(std::log(2.0));
    const auto p2 = project_gaussian(g, 0, kCam, SE3::identity());
    CHECK(p2.cov_a - kCovarianceDilation ==
          doctest::Approx(4.0 * (p1.cov_a - kCovarianceDilation)));
    CHECK(p2.cov_b == doctest::Approx(4.0 * p1.cov_b));
    CHECK(p2.cov_c - kCovarianceDilation ==
          doctest::Approx(4.0 * (p1.cov_c - kCovarianceDilation)));
  }
}

TEST_CASE("rasterize fundamentals") {
  RenderConfig cfg;
  cfg.background = Vec3(0.2, 0.3, 0.4);

  SUBCASE("empty set renders the background with zero alpha") {
    GaussianSet g;
    const auto r = rasterize(g, nullptr, MotionMode::kNone, {}, SE3::identity(),
                             kCam, cfg);
    CHECK(r.image.at(5, 7, 0) == 0.2);
    CHECK(r.image.at(5, 7, 2) == 0.4);
    CHECK(r.alpha.at(5, 7) == 0.0);
  }

  SUBCASE("single near-opaque gaussian dominates the center pixel") {
    const GaussianSet g = single_gaussian({0, 0, 2.0}, 0.08, 0.999, {1, 0, 0});
    const auto r = rasterize(g, nullptr, MotionMode::kNone, {}, SE3::identity(),
                             kCam, cfg);
    const auto p = project_gaussian(g, 0, kCam, SE3::identity(), cfg);
    const double expected_alpha = sigmoid(logit(0.999));
    CHECK(r.alpha.at(16, 16) == doctest::Approx(expected_alpha).epsilon(1e-6));
    CHECK(r.image.at(16, 16, 0) ==
          doctest::Approx(expected_alpha * 1.0 + (1 - expected_alpha) * 0.2));
    CHECK(p.valid);
  }

  SUBCASE("an opaque front gaussian hides the back one") {
    GaussianSet g = single_gaussian({0, 0, 2.0}, 0.08, 0.5, {1, 0, 0});
    g.logit_opacity[0] = 60.0;  // sigmoid saturates to exactly 1.0
    GaussianSet both = g;
    both.append({0, 0, 4.0}, quat_identity(), Vec3::Constant(std::log(0.2)),
                logit(0.9), {0, 1, 0}, 0);
    const auto front_only = rasterize(g, nullptr, MotionMode::kNone, {},
                                      SE3::identity(), kCam, cfg);
    const auto layered = rasterize(both, nullptr, MotionMode::kNone, {},
                                   SE3::identity(), kCam, cfg);
    CHECK(layered.image.at(16, 16, 0) ==
          doctest::Approx(front_only.image.at(16, 16, 0)).epsilon(1e-12));
    CHECK(layered.image.at(16, 16, 1) ==
          doctest::Approx(front_only.image.at(16, 16, 1)).epsilon(1e-9));
  }
}

TEST_CASE("compositing weights plus transmittance sum to one") {
  auto s = testutil::make_splat_scene(101, 30, 32, 32);
  const auto r = rasterize(s.g, &s.field, MotionMode::kFieldEndpoint, s.ratios,
                           s.cam, s.k, s.cfg);
  for (int y = 0; y < s.k.height; ++y) {
    for (int x = 0; x < s.k.width; ++x) {
      const auto& surv = r.survivors[y * s.k.width + x];
      double t = 1.0;
      double weight_sum = 0.0;
      for (const int i : surv) {
        const auto& p = r.proj[i];
        const double dx = x - p.mean2d.x();
        const double dy = y - p.mean2d.y();
        const double m = p.q11 * dx * dx + 2 * p.q12 * dx * dy + p.q22 * dy * dy;
        const double a = p.opacity * std::exp(-0.5 * m);
        weight_sum += a * t;
        t *= 1.0 - a;
      }
      CHECK(weight_sum + t == doctest::Approx(1.0).epsilon(1e-6));
      CHECK(r.alpha.at(x, y) == doctest::Approx(weight_sum).epsilon(1e-9));
    }
  }
}

TEST_CASE("render is invariant to input order at distinct depths") {
  auto s = testutil::make_splat_scene(77, 25, 32, 32);
  const auto r1 = rasterize(s.g, &s.field, MotionMode::kNone, {}, s.cam, s.k, s.cfg);
  // reverse the gaussian order
  GaussianSet rev;
  for (std::size_t i = s.g.size(); i-- > 0;) {
    rev.append(s.g.positions[i], s.g.shape_rot[i], s.g.log_scales[i],
               s.g.logit_opacity[i], s.g.color[i], s.g.region_id[i]);
  }
  const auto r2 = rasterize(rev, &s.field, MotionMode::kNone, {}, s.cam, s.k, s.cfg);
  double max_diff = 0.0;
  for (std::size_t i = 0; i < r1.image.data.size(); ++i) {
    max_diff = std::max(max_diff, std::abs(r1.image.data[i] - r2.image.data[i]));
  }
  CHECK(max_diff < 1e-12);
}

TEST_CASE("rendered values stay in range for in-range colors") {
  auto s = testutil::make_splat_scene(55, 40, 32, 32);
  const auto r = rasterize(s.g, &s.field, MotionMode::kFieldEndpoint, s.ratios,
                           s.cam, s.k, s.cfg);
  for (double v : r.image.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("color gradient equals accumulated compositing weight") {
  const GaussianSet g = single_gaussian({0, 0, 2.0}, 0.1, 0.7, {0.8, 0.1, 0.1});
  RenderConfig cfg;
  const auto r =
      rasterize(g, nullptr, MotionMode::kNone, {}, SE3::identity(), kCam, cfg);
  RgbImage ones(kCam.width, kCam.height, 1.0);  // loss = sum of all pixels
  const auto grads = rasterize_backward(g, nullptr, MotionMode::kNone, {},
                                        SE3::identity(), kCam, cfg, r, ones);
  double alpha_sum = 0.0;
  for (double v : r.alpha.data) alpha_sum += v;
  for (int c = 0; c < 3; ++c) {
    CHECK(grads.d_color[0][c] == doctest::Approx(alpha_sum).epsilon(1e-9));
  }
}

TEST_CASE("zero-opacity gaussian receives zero color gradient") {
  GaussianSet g = single_gaussian({0, 0, 2.0}, 0.1, 0.7, {0.8, 0.1, 0.1});
  g.append({0.2, 0, 3.0}, quat_identity(), Vec3::Constant(std::log(0.1)), -40.0,
           {0, 1, 0}, 0);  // sigmoid(-40) under the alpha threshold
  RenderConfig cfg;
  const auto r =
      rasterize(g, nullptr, MotionMode::kNone, {}, SE3::identity(), kCam, cfg);
  RgbImage ones(kCam.width, kCam.height, 1.0);
  const auto grads = rasterize_backward(g, nullptr, MotionMode::kNone, {},
                                        SE3::identity(), kCam, cfg, r, ones);
  CHECK(grads.d_color[1].norm() == 0.0);
}

TEST_CASE("backward rejects stale intermediates") {
  auto s = testutil::make_splat_scene(31, 10, 24, 24);
  const auto r = rasterize(s.g, &s.field, MotionMode::kNone, {}, s.cam, s.k, s.cfg);
  RgbImage grad(24, 24, 0.1);
  SE3 other_cam = s.cam;
  other_cam.translation.x() += 0.01;
  CHECK_THROWS_AS(rasterize_backward(s.g, &s.field, MotionMode::kNone, {}, other_cam,
                                     s.k, s.cfg, r, grad),
                  StaleIntermediates);
  RenderConfig cfg2 = s.cfg;
  cfg2.gaussian_extent *= 2.0;
  CHECK_THROWS_AS(rasterize_backward(s.g, &s.field, MotionMode::kNone, {}, s.cam,
                                     s.k, cfg2, r, grad),
                  StaleIntermediates);
}

TEST_CASE("analytic gradients match finite differences (endpoint mode)") {
  auto s = testutil::make_splat_scene(7, 14, 24, 24);
  const auto errs = testutil::splat_gradcheck(s, MotionMode::kFieldEndpoint, 0.3);
  for (const auto& [block, err] : errs) {
    INFO("block ", block);
    CHECK(err < 1e-3);
  }
}

TEST_CASE("analytic gradients match finite differences (interp mode)") {
  auto s = testutil::make_splat_scene(9, 14, 24, 24);
  const auto errs = testutil::splat_gradcheck(s, MotionMode::kFieldInterp, 0.3);
  for (const auto& [block, err] : errs) {
    INFO("block ", block);
    CHECK(err < 1e-3);
  }
}

TEST_CASE("analytic gradients match finite differences (no motion)") {
  auto s = testutil::make_splat_scene(11, 14, 24, 24);
  const auto errs = testutil::splat_gradcheck(s, MotionMode::kNone, 0.0);
  for (const auto& [block, err] : errs) {
    INFO("block ", block);
    CHECK(err < 1e-3);
  }
}
