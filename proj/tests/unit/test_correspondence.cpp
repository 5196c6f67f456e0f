// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "dynsplat/flow/consistency.hpp"
#include "support/testutil.hpp"

using namespace dynsplat;

TEST_CASE("sample_flow on constant and grid-aligned fields") {
  FlowMap f(8, 8, 3.0, -2.0);
  CHECK((sample_flow(f, {2.3, 4.7}) - Vec2(3.0, -2.0)).norm() < 1e-12);
  f.du(3, 3) = 5.0;
  CHECK(sample_flow(f, {3.0, 3.0}).x() == 5.0);
  CHECK_THROWS_AS(sample_flow(f, {-0.5, 2.0}), OutOfBounds);
  CHECK_THROWS_AS(sample_flow(f, {2.0, 7.5}), OutOfBounds);
}

TEST_CASE("sample_flow is linear between two pixels") {
  FlowMap f(2, 1);
  f.du(0, 0) = 1.0;
  f.du(1, 0) = 3.0;
  CHECK(sample_flow(f, {0.5, 0.0}).x() == doctest::Approx(2.0));
}

TEST_CASE("sample_flow propagates NaN neighbors") {
  FlowMap f(4, 4, 1.0, 1.0);
  f.du(2, 2) = std::numeric_limits<double>::quiet_NaN();
  CHECK(std::isnan(sample_flow(f, {1.5, 1.5}).x()));
  CHECK_FALSE(std::isnan(sample_flow(f, {0.2, 0.2}).x()));
}

TEST_CASE("track follows stored flow") {
  FlowMap f(32, 32);
  CHECK((track({10, 10}, f) - Pixel(10, 10)).norm() == 0.0);
  f.du(10, 10) = 5.0;
  CHECK((track({10, 10}, f) - Pixel(15, 10)).norm() == 0.0);
  f.du(10, 10) = -20.0;
  const Pixel p = track({10, 10}, f);
  CHECK(p.x() == -10.0);  // out of bounds is a valid, filterable result
  CHECK_FALSE(in_image(32, 32, p.x(), p.y()));
}

TEST_CASE("forward-backward weights accept consistent flow") {
  FlowMap fwd(16, 16, 2.0, 1.0);
  FlowMap bwd(16, 16, -2.0, -1.0);
  const ScalarMap w = forward_backward_weights(fwd, bwd);
  for (int y = 0; y < 15; ++y) {
    for (int x = 0; x < 13; ++x) {
      CHECK(w.at(x, y) == 1.0);  // track stays in bounds here
    }
  }
  // pixels tracking outside the image get weight 0
  CHECK(w.at(15, 15) == 0.0);
}

TEST_CASE("forward-backward weights reject inconsistent flow") {
  FlowMap fwd(8, 8, 10.0, 0.0);
  FlowMap bwd(8, 8, 0.0, 0.0);
  // r = f_fwd, |r|^2 = 100 >= 0.01*100 + 0.5
  const ScalarMap w = forward_backward_weights(fwd, bwd);
  for (double v : w.data) CHECK(v == 0.0);
}

TEST_CASE("weights are binary and monotone in beta") {
  Rng rng(123);
  FlowMap fwd(12, 12), bwd(12, 12);
  for (double& v : fwd.data) v = rng.uniform(-1.5, 1.5);
  for (double& v : bwd.data) v = rng.uniform(-1.5, 1.5);
  ConsistencyParams lo{0.01, 0.2}, hi{0.01, 2.0};
  const ScalarMap wlo = forward_backward_weights(fwd, bwd, lo);
  const ScalarMap whi = forward_backward_weights(fwd, bwd, hi);
  for (std::size_t i = 0; i < wlo.data.size(); ++i) {
    CHECK((wlo.data[i] == 0.0 || wlo.data[i] == 1.0));
    CHECK(whi.data[i] >= wlo.data[i]);
  }
}

TEST_CASE("weights are symmetric on an exactly invertible pair") {
  FlowMap fwd(10, 10, 1.0, -2.0);
  FlowMap bwd(10, 10, -1.0, 2.0);
  const ScalarMap wf = forward_backward_weights(fwd, bwd);
  const ScalarMap wb = forward_backward_weights(bwd, fwd);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 10; ++x) {
      const bool fwd_in = in_image(10, 10, x + 1.0, y - 2.0);
      const bool bwd_in = in_image(10, 10, x - 1.0, y + 2.0);
      if (fwd_in && bwd_in) CHECK(wf.at(x, y) == wb.at(x, y));
    }
  }
}

TEST_CASE("dimension mismatch is rejected") {
  FlowMap fwd(8, 8), bwd(4, 4);
  CHECK_THROWS_AS(forward_backward_weights(fwd, bwd), DimensionMismatch);
}
