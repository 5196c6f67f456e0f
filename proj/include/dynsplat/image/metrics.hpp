// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "dynsplat/core/error.hpp"
#include "dynsplat/image/rasters.hpp"

namespace dynsplat {

namespace detail {

/// Normalized Gaussian window; 11 taps, sigma 1.5, shrunk (odd) when the
/// image is smaller than the window.
inline std::vector<double> ssim_window(int img_min_dim) {
  int win = 11;
  if (img_min_dim < win) win = img_min_dim % 2 == 1 ? img_min_dim : img_min_dim - 1;
  if (win < 1) win = 1;
  std::vector<double> k(win);
  const double sigma = 1.5;
  const double c = (win - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < win; ++i) {
    k[i] = std::exp(-0.5 * (i - c) * (i - c) / (sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

/// Plane of one channel's values with row-major layout helpers.
struct Plane {
  int w = 0, h = 0;
  std::vector<double> v;
  Plane() = default;
  Plane(int w_, int h_) : w(w_), h(h_), v(static_cast<std::size_t>(w_) * h_, 0.0) {}
  double& at(int x, int y) { return v[static_cast<std::size_t>(y) * w + x]; }
  double at(int x, int y) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

/// Valid-region separable correlation: out is (w-win+1) x (h-win+1).
inline Plane conv_valid(const Plane& f, const std::vector<double>& k) {
  const int win = static_cast<int>(k.size());
  Plane tmp(f.w - win + 1, f.h);
  for (int y = 0; y < f.h; ++y) {
    for (int x = 0; x < tmp.w; ++x) {
      double s = 0.0;
      for (int i = 0; i < win; ++i) s += k[i] * f.at(x + i, y);
      tmp.at(x, y) = s;
    }
  }
  Plane out(tmp.w, f.h - win + 1);
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) {
      double s = 0.0;
      for (int i = 0; i < win; ++i) s += k[i] * tmp.at(x, y + i);
      out.at(x, y) = s;
    }
  }
  return out;
}

/// Adjoint of conv_valid: scatters map-space gradients back to image space.
inline void conv_valid_adjoint(const Plane& g, const std::vector<double>& k,
                               Plane* out) {
  const int win = static_cast<int>(k.size());
  Plane tmp(g.w, g.h + win - 1);
  for (int y = 0; y < g.h; ++y) {
    for (int x = 0; x < g.w; ++x) {
      const double gv = g.at(x, y);
      if (gv == 0.0) continue;
      for (int i = 0; i < win; ++i) tmp.at(x, y + i) += k[i] * gv;
    }
  }
  for (int y = 0; y < tmp.h; ++y) {
    for (int x = 0; x < tmp.w; ++x) {
      const double gv = tmp.at(x, y);
      if (gv == 0.0) continue;
      for (int i = 0; i < win; ++i) out->at(x + i, y) += k[i] * gv;
    }
  }
}

inline Plane channel_plane(const RgbImage& img, int c) {
  Plane p(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) p.at(x, y) = img.at(x, y, c);
  }
  return p;
}

constexpr double kSsimC1 = 0.01 * 0.01;  // (k1 * L)^2, L = 1
constexpr double kSsimC2 = 0.03 * 0.03;

}  // namespace detail

/// Mean SSIM over the valid window region, per channel, averaged. When grad
/// is non-null, accumulates d(mean SSIM)/d(a) into it.
inline double ssim(const RgbImage& a, const RgbImage& b, RgbImage* grad = nullptr) {
  if (a.width != b.width || a.height != b.height) {
    throw DimensionMismatch("ssim: image dimensions differ");
  }
  const auto k = detail::ssim_window(std::min(a.width, a.height));
  const int win = static_cast<int>(k.size());
  const int mw = a.width - win + 1;
  const int mh = a.height - win + 1;
  const double inv_count = 1.0 / (static_cast<double>(mw) * mh * 3.0);
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    const detail::Plane x = detail::channel_plane(a, c);
    const detail::Plane y = detail::channel_plane(b, c);
    detail::Plane xx(x.w, x.h), yy(x.w, x.h), xy(x.w, x.h);
    for (std::size_t i = 0; i < x.v.size(); ++i) {
      xx.v[i] = x.v[i] * x.v[i];
      yy.v[i] = y.v[i] * y.v[i];
      xy.v[i] = x.v[i] * y.v[i];
    }
    const detail::Plane mu_x = detail::conv_valid(x, k);
    const detail::Plane mu_y = detail::conv_valid(y, k);
    const detail::Plane m_xx = detail::conv_valid(xx, k);
    const detail::Plane m_yy = detail::conv_valid(yy, k);
    const detail::Plane m_xy = detail::conv_valid(xy, k);

    detail::Plane g_mu(mw, mh), g_x2(mw, mh), g_xy(mw, mh);
    for (int py = 0; py < mh; ++py) {
      for (int px = 0; px < mw; ++px) {
        const double mx = mu_x.at(px, py), my = mu_y.at(px, py);
        const double sx2 = m_xx.at(px, py) - mx * mx;
        const double sy2 = m_yy.at(px, py) - my * my;
        const double sxy = m_xy.at(px, py) - mx * my;
        const double a1 = 2.0 * mx * my + detail::kSsimC1;
        const double a2 = 2.0 * sxy + detail::kSsimC2;
        const double b1 = mx * mx + my * my + detail::kSsimC1;
        const double b2 = sx2 + sy2 + detail::kSsimC2;
        const double s = (a1 * a2) / (b1 * b2);
        total += s;
        if (grad) {
          const double ds_da1 = a2 / (b1 * b2);
          const double ds_da2 = a1 / (b1 * b2);
          const double ds_db1 = -s / b1;
          const double ds_db2 = -s / b2;
          // mu_x enters a1, b1 directly and sxy, sx2 through the centering
          g_mu.at(px, py) = inv_count * (ds_da1 * 2.0 * my + ds_db1 * 2.0 * mx +
                                         ds_da2 * (-2.0 * my) + ds_db2 * (-2.0 * mx));
          g_x2.at(px, py) = inv_count * ds_db2;       // coefficient of w*(x^2)
          g_xy.at(px, py) = inv_count * 2.0 * ds_da2; // coefficient of w*(x*y)
        }
      }
    }
    if (grad) {
      detail::Plane gx(x.w, x.h), gx2(x.w, x.h), gxy(x.w, x.h);
      detail::conv_valid_adjoint(g_mu, k, &gx);
      detail::conv_valid_adjoint(g_x2, k, &gx2);
      detail::conv_valid_adjoint(g_xy, k, &gxy);
      for (int iy = 0; iy < a.height; ++iy) {
        for (int ix = 0; ix < a.width; ++ix) {
          grad->at(ix, iy, c) += gx.at(ix, iy) +
                                 2.0 * x.at(ix, iy) * gx2.at(ix, iy) +
                                 y.at(ix, iy) * gxy.at(ix, iy);
        }
      }
    }
  }
  return total * inv_count;
}

/// PSNR over all RGB values in dB, capped at 99 (identical images).
inline double psnr(const RgbImage& a, const RgbImage& b) {
  if (a.width != b.width || a.height != b.height) {
    throw DimensionMismatch("psnr: image dimensions differ");
  }
  double mse = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.data.size());
  if (mse <= 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

struct ImageLossResult {
  double loss = 0.0;
  double l1 = 0.0;     // mean absolute error component
  double dssim = 0.0;  // (1 - SSIM) / 2 component
  RgbImage grad;       // dL/d rendered
};

/// (1 - lambda) * mean-L1 + lambda * (1 - SSIM)/2, with the gradient with
/// respect to the rendered image.
inline ImageLossResult image_loss(const RgbImage& rendered, const RgbImage& target,
                                  double lambda) {
  if (rendered.width != target.width || rendered.height != target.height) {
    throw DimensionMismatch("image_loss: image dimensions differ");
  }
  ImageLossResult out;
  out.grad = RgbImage(rendered.width, rendered.height, 0.0);
  const double n = static_cast<double>(rendered.data.size());
  double l1 = 0.0;
  for (std::size_t i = 0; i < rendered.data.size(); ++i) {
    const double d = rendered.data[i] - target.data[i];
    l1 += std::abs(d);
    out.grad.data[i] = (1.0 - lambda) * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n;
  }
  out.l1 = l1 / n;
  if (lambda != 0.0) {
    RgbImage ssim_grad(rendered.width, rendered.height, 0.0);
    const double mssim = ssim(rendered, target, &ssim_grad);
    out.dssim = 0.5 * (1.0 - mssim);
    for (std::size_t i = 0; i < out.grad.data.size(); ++i) {
      out.grad.data[i] += lambda * -0.5 * ssim_grad.data[i];
    }
  }
  out.loss = (1.0 - lambda) * out.l1 + lambda * out.dssim;
  return out;
}

}  // namespace dynsplat
