// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <functional>

#include "dynsplat/ba/dense_ba.hpp"
#include "support/miniscene.hpp"
#include "support/testutil.hpp"

using namespace dynsplat;

namespace {

std::vector<SE3> gt_transforms(const testutil::MiniScene& ms) {
  return {ms.t_region0(), ms.t_region1()};
}

/// Perturbs region transforms by a seeded small motion.
std::vector<SE3> perturbed_transforms(const testutil::MiniScene& ms, Rng& rng,
                                      double rot_mag, double trans_mag) {
  std::vector<SE3> ts = gt_transforms(ms);
  for (SE3& t : ts) {
    const SE3 delta = SE3::from_matrix(
        testutil::random_rotation(rng, rot_mag),
        trans_mag * Vec3(rng.normal(), rng.normal(), rng.normal()));
    t = se3_compose(delta, t);
  }
  return ts;
}

/// Max |analytic - fd| over the block, relative to the block sup norm.
/// Entries failing at the nominal step are re-probed at h/20: a finite-
/// difference artifact from straddling a Huber kink shrinks with h, a wrong
/// analytic gradient does not.
double block_rel_error(std::span<const double> an, std::span<const double> fd,
                       const std::function<double(std::size_t, double)>& refine) {
  double den = 1e-7;
  for (std::size_t i = 0; i < an.size(); ++i) {
    den = std::max({den, std::abs(an[i]), std::abs(fd[i])});
  }
  double num = 0.0;
  for (std::size_t i = 0; i < an.size(); ++i) {
    double err = std::abs(an[i] - fd[i]);
    if (err / den > 1e-3) err = std::abs(an[i] - refine(i, 5e-6));
    num = std::max(num, err);
  }
  return num / den;
}

}  // namespace

TEST_CASE("static scene at identity has (near-)zero losses") {
  auto ms = testutil::make_two_plane_scene(16, 16, false, 0.0, 0.0);
  // zero motions: flows are identically zero, everything static-consistent
  BAParams params;
  DenseBA ba(ms.scene, params);
  const auto state = ba.initial_state(gt_transforms(ms));
  BATermLosses t;
  ba.total_loss(state, {}, &t);
  CHECK(t.total < 1e-9);
  double l1 = 0.0;
  ba.reproj_loss(state, 0, {}, &l1);
  CHECK(l1 < 1e-9);
}

TEST_CASE("losses vanish on the exact forward model (translation-only scene)") {
  auto ms = testutil::make_two_plane_scene(24, 24, false);
  BAParams params;
  DenseBA ba(ms.scene, params);
  const auto state = ba.initial_state(gt_transforms(ms));
  BATermLosses t;
  ba.total_loss(state, {}, &t);
  CHECK(t.reproj_fwd < 1e-8);
  CHECK(t.reproj_bwd < 1e-8);
  // The cross-frame depth terms keep a small floor where bilinear sampling
  // straddles the object silhouette; everywhere else they vanish.
  CHECK(t.depth_fwd < 1.0);
  CHECK(t.depth_bwd < 1.0);
  CHECK(t.total < 0.15);
}

TEST_CASE("depth prior closed form: theta0 = 2 on a unit-depth scene") {
  auto ms = testutil::make_two_plane_scene(24, 24, false, 0.0, 0.0);
  // flat unit-depth static scene
  for (double& v : ms.scene.d0.data) v = 1.0;
  for (double& v : ms.scene.d1.data) v = 1.0;
  for (int& v : ms.scene.labels0.data) v = 0;
  ms.scene.num_regions = 1;
  BAParams params;
  DenseBA ba(ms.scene, params);
  auto state = ba.initial_state({SE3::identity()});
  state[ba.scale_shift_offset()] = 2.0;  // theta0
  double l1 = 0.0;
  ba.depth_reg_loss(state, 0, {}, &l1);
  CHECK(l1 == doctest::Approx(24.0 * 24.0).epsilon(1e-12));
}

TEST_CASE("perturbing one depth raises the reprojection loss, gradient pushes back") {
  auto ms = testutil::make_two_plane_scene(16, 16, false);
  BAParams params;
  DenseBA ba(ms.scene, params);
  auto state = ba.initial_state(gt_transforms(ms));
  const std::size_t depth_slot = ba.depth0_offset();
  state[depth_slot] += std::log(1.1);
  std::vector<double> grad(ba.num_params(), 0.0);
  double l1 = 0.0;
  const double loss = ba.reproj_loss(state, 0, grad, &l1);
  CHECK(loss > 1e-6);
  CHECK(grad[depth_slot] > 0.0);  // pushes the depth back down
}

TEST_CASE("total loss is zero when both lambdas vanish") {
  auto ms = testutil::make_two_plane_scene(16, 16, true);
  BAParams params;
  params.lambda1 = 0.0;
  params.lambda2 = 0.0;
  DenseBA ba(ms.scene, params);
  Rng rng(5);
  const auto state = ba.initial_state(perturbed_transforms(ms, rng, 0.1, 0.2));
  BATermLosses t;
  const double huber = ba.total_loss(state, {}, &t);
  CHECK(huber == 0.0);
  CHECK(t.total == 0.0);
}

TEST_CASE("bidirectional differs from forward-only exactly by the backward terms") {
  auto ms = testutil::make_two_plane_scene(20, 20, true);
  BAParams on;
  BAParams off = on;
  off.bidirectional = false;
  DenseBA ba_on(ms.scene, on);
  DenseBA ba_off(ms.scene, off);
  Rng rng(7);
  const auto ts = perturbed_transforms(ms, rng, 0.05, 0.05);
  auto state_on = ba_on.initial_state(ts);
  auto state_off = ba_off.initial_state(ts);
  BATermLosses t_on, t_off;
  ba_on.total_loss(state_on, {}, &t_on);
  ba_off.total_loss(state_off, {}, &t_off);
  CHECK(t_off.reproj_bwd == 0.0);
  CHECK(t_off.depth_bwd == 0.0);
  CHECK(t_on.reproj_fwd == doctest::Approx(t_off.reproj_fwd).epsilon(1e-14));
  CHECK(t_on.depth_fwd == doctest::Approx(t_off.depth_fwd).epsilon(1e-14));
  CHECK(t_on.total - t_off.total ==
        doctest::Approx(on.lambda1 * t_on.reproj_bwd + on.lambda2 * t_on.depth_bwd)
            .epsilon(1e-12));
}

TEST_CASE("loss is invariant to region relabeling") {
  auto ms = testutil::make_two_plane_scene(20, 20, true);
  BAParams params;
  DenseBA ba(ms.scene, params);
  Rng rng(11);
  const auto ts = perturbed_transforms(ms, rng, 0.05, 0.05);
  BATermLosses t1;
  ba.total_loss(ba.initial_state(ts), {}, &t1);

  // introduce a third (empty would throw) region by splitting the background:
  // instead, swap labels {0 <-> none}; here we swap region ids 0 and 1 is not
  // allowed (0 must stay static), so verify invariance under permuting two
  // dynamic regions: split the disc into left/right halves.
  SceneData split = ms.scene;
  for (int y = 0; y < split.labels0.height; ++y) {
    for (int x = 0; x < split.labels0.width; ++x) {
      if (split.labels0.at(x, y) == 1 && x >= split.labels0.width / 2) {
        split.labels0.at(x, y) = 2;
      }
    }
  }
  split.num_regions = 3;
  DenseBA ba_split(split, params);
  const auto ts3 = std::vector<SE3>{ts[0], ts[1], ts[1]};
  BATermLosses t3;
  ba_split.total_loss(ba_split.initial_state(ts3), {}, &t3);

  SceneData swapped = split;
  for (int& v : swapped.labels0.data) {
    if (v == 1) v = 2;
    else if (v == 2) v = 1;
  }
  DenseBA ba_swapped(swapped, params);
  BATermLosses t3s;
  ba_swapped.total_loss(ba_swapped.initial_state(ts3), {}, &t3s);
  CHECK(t3.total == doctest::Approx(t3s.total).epsilon(1e-14));
}

TEST_CASE("analytic BA gradients match central finite differences") {
  auto ms = testutil::make_two_plane_scene(14, 14, true);
  BAParams params;
  DenseBA ba(ms.scene, params);
  Rng rng(13);
  for (int trial = 0; trial < 3; ++trial) {
    auto state = ba.initial_state(perturbed_transforms(ms, rng, 0.03, 0.05));
    // also perturb scale/shift and some depths
    state[ba.scale_shift_offset() + 0] = 1.0 + 0.1 * rng.normal();
    state[ba.scale_shift_offset() + 1] = 0.1 * rng.normal();
    state[ba.scale_shift_offset() + 2] = 1.0 + 0.1 * rng.normal();
    state[ba.scale_shift_offset() + 3] = 0.1 * rng.normal();
    for (std::size_t i = ba.depth0_offset(); i < ba.num_params(); ++i) {
      state[i] += 0.02 * rng.normal();
    }

    std::vector<double> grad(ba.num_params(), 0.0);
    ba.total_loss(state, grad, nullptr);

    auto probe = [&](std::size_t i, double h_scale) {
      const double orig = state[i];
      const double h = h_scale * std::max(1.0, std::abs(orig));
      state[i] = orig + h;
      const double lp = ba.total_loss(state, {}, nullptr);
      state[i] = orig - h;
      const double lm = ba.total_loss(state, {}, nullptr);
      state[i] = orig;
      return (lp - lm) / (2.0 * h);
    };
    std::vector<double> fd(ba.num_params(), 0.0);
    for (std::size_t i = 0; i < ba.num_params(); ++i) fd[i] = probe(i, 1e-4);

    const std::size_t npose = 9 * 2;
    auto refine_at = [&](std::size_t base) {
      return [&, base](std::size_t i, double h) { return probe(base + i, h); };
    };
    CHECK(block_rel_error({grad.data(), npose}, {fd.data(), npose}, refine_at(0)) < 1e-3);
    CHECK(block_rel_error({grad.data() + npose, 4}, {fd.data() + npose, 4},
                          refine_at(npose)) < 1e-3);
    CHECK(block_rel_error({grad.data() + npose + 4, ba.num_params() - npose - 4},
                          {fd.data() + npose + 4, ba.num_params() - npose - 4},
                          refine_at(npose + 4)) < 1e-3);
  }
}

TEST_CASE("separate loss terms also match finite differences") {
  auto ms = testutil::make_two_plane_scene(14, 14, true);
  BAParams params;
  DenseBA ba(ms.scene, params);
  Rng rng(17);
  auto state = ba.initial_state(perturbed_transforms(ms, rng, 0.03, 0.05));
  for (int region = 0; region < 2; ++region) {
    for (int term = 0; term < 2; ++term) {
      std::vector<double> grad(ba.num_params(), 0.0);
      auto eval = [&](std::span<const double> st, std::span<double> g) {
        return term == 0 ? ba.reproj_loss(st, region, g, nullptr)
                         : ba.depth_reg_loss(st, region, g, nullptr);
      };
      eval(state, grad);
      // probe a handful of parameters of each kind
      std::vector<std::size_t> probes = {
          ba.pose_offset(region) + 1,     ba.pose_offset(region) + 7,
          ba.scale_shift_offset() + 0,    ba.scale_shift_offset() + 2,
          ba.depth0_offset() + 5,         ba.depth0_offset() + 50};
      for (const std::size_t i : probes) {
        const double orig = state[i];
        const double h = 1e-5 * std::max(1.0, std::abs(orig));
        state[i] = orig + h;
        const double lp = eval(state, {});
        state[i] = orig - h;
        const double lm = eval(state, {});
        state[i] = orig;
        const double fd = (lp - lm) / (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
        INFO("region ", region, " term ", term, " param ", i);
        CHECK(std::abs(fd - grad[i]) / denom < 2e-3);
      }
    }
  }
}

TEST_CASE("run_ba recovers poses from a perturbed initialization") {
  auto ms = testutil::make_two_plane_scene(24, 24, true);
  BAParams params;
  params.iters = 800;
  DenseBA ba(ms.scene, params);
  Rng rng(19);
  const auto init = perturbed_transforms(ms, rng, 0.02, 0.02);
  const BAResult res = ba.run(init);

  CHECK(res.final_losses.total < res.initial_losses.total);
  CHECK(testutil::rotation_error_deg(res.t_cam, ms.t_region0()) < 0.3);
  CHECK((res.t_cam.translation - ms.t_region0().translation).norm() < 0.04);
  REQUIRE(res.t_obj.size() == 1);
  const SE3 gt_obj = ms.m_obj;
  CHECK(testutil::rotation_error_deg(res.t_obj[0], gt_obj) < 1.0);
}

TEST_CASE("run_ba is deterministic") {
  auto ms = testutil::make_two_plane_scene(16, 16, true);
  BAParams params;
  params.iters = 50;
  DenseBA ba(ms.scene, params);
  Rng rng(23);
  const auto init = perturbed_transforms(ms, rng, 0.02, 0.02);
  const BAResult a = ba.run(init);
  const BAResult b = ba.run(init);
  CHECK(a.t_cam.translation == b.t_cam.translation);
  CHECK(a.t_cam.rotation.a1 == b.t_cam.rotation.a1);
  CHECK(a.depth0.data == b.depth0.data);
  CHECK(a.final_losses.total == b.final_losses.total);
}

TEST_CASE("non-finite losses abort with the term name") {
  auto ms = testutil::make_two_plane_scene(16, 16, false);
  ms.scene.d0.at(8, 8) = 1e308;
  ms.scene.d0.at(9, 8) = 1e308;
  ms.scene.d0.at(10, 8) = 1e308;
  BAParams params;
  params.iters = 3;
  DenseBA ba(ms.scene, params);
  try {
    ba.run(gt_transforms(ms));
    FAIL("expected NonFiniteLoss");
  } catch (const NonFiniteLoss& e) {
    CHECK(std::string(e.what()).find("iteration") != std::string::npos);
  }
}

TEST_CASE("empty regions are rejected") {
  auto ms = testutil::make_two_plane_scene(16, 16, false);
  SceneData bad = ms.scene;
  for (int& v : bad.labels0.data) v = std::min(v, 1);
  bad.num_regions = 3;  // region 2 exists nowhere
  BAParams params;
  CHECK_THROWS_AS(DenseBA(bad, params), EmptyRegion);
}
