// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "dynsplat/image/metrics.hpp"
#include "support/testutil.hpp"

using namespace dynsplat;

namespace {

RgbImage random_image(int w, int h, Rng& rng) {
  RgbImage img(w, h);
  for (double& v : img.data) v = rng.uniform(0.05, 0.95);
  return img;
}

}  // namespace

TEST_CASE("image_loss basics") {
  Rng rng(3);
  const RgbImage a = random_image(16, 16, rng);
  CHECK(image_loss(a, a, 0.2).loss == 0.0);

  RgbImage shifted = a;
  for (double& v : shifted.data) v += 0.1;
  CHECK(image_loss(shifted, a, 0.0).loss == doctest::Approx(0.1));

  CHECK(image_loss(a, a, 1.0).loss == 0.0);
  RgbImage perturbed = a;
  perturbed.at(8, 8, 1) += 0.2;
  CHECK(image_loss(perturbed, a, 1.0).loss > 0.0);

  CHECK_THROWS_AS(image_loss(a, random_image(8, 8, rng), 0.2), DimensionMismatch);
}

TEST_CASE("psnr closed forms") {
  Rng rng(5);
  const RgbImage a = random_image(12, 12, rng);
  CHECK(psnr(a, a) == 99.0);
  RgbImage b = a;
  for (double& v : b.data) v += 0.1;  // MSE = 0.01 exactly
  CHECK(psnr(a, b) == doctest::Approx(20.0));
}

TEST_CASE("ssim of identical images is one") {
  Rng rng(7);
  const RgbImage a = random_image(24, 24, rng);
  CHECK(ssim(a, a) == doctest::Approx(1.0));
  RgbImage b = a;
  for (std::size_t i = 0; i < b.data.size(); i += 3) b.data[i] = 1.0 - b.data[i];
  CHECK(ssim(a, b) < 1.0);
}

TEST_CASE("image_loss gradient matches central finite differences") {
  Rng rng(11);
  RgbImage x = random_image(20, 18, rng);
  const RgbImage target = random_image(20, 18, rng);
  const double lambda = 0.35;
  const ImageLossResult res = image_loss(x, target, lambda);

  // probe a scattering of entries
  const double h = 1e-5;
  double max_rel = 0.0;
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t i = rng.uniform_int(x.data.size());
    const double orig = x.data[i];
    x.data[i] = orig + h;
    const double lp = image_loss(x, target, lambda).loss;
    x.data[i] = orig - h;
    const double lm = image_loss(x, target, lambda).loss;
    x.data[i] = orig;
    const double fd = (lp - lm) / (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(res.grad.data[i]), 1e-8});
    max_rel = std::max(max_rel, std::abs(fd - res.grad.data[i]) / denom);
  }
  CHECK(max_rel < 1e-3);
}

TEST_CASE("ssim handles images smaller than the window") {
  Rng rng(13);
  const RgbImage a = random_image(7, 7, rng);
  CHECK(ssim(a, a) == doctest::Approx(1.0));
}
