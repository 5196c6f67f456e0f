// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace dynsplat {

/// One contiguous slice of the parameter vector stepping at its own rate.
struct AdamGroup {
  std::size_t offset = 0;
  std::size_t length = 0;
  double lr = 1e-3;
};

/// Textbook Adam with bias correction and per-group learning rates.
class Adam {
 public:
  Adam(std::size_t num_params, std::vector<AdamGroup> groups, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8)
      : groups_(std::move(groups)),
        m_(num_params, 0.0),
        v_(num_params, 0.0),
        beta1_(beta1),
        beta2_(beta2),
        eps_(eps) {}

  void step(std::span<double> params, std::span<const double> grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (const AdamGroup& g : groups_) {
      for (std::size_t i = g.offset; i < g.offset + g.length; ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
        const double mhat = m_[i] / bc1;
        const double vhat = v_[i] / bc2;
        params[i] -= g.lr * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  int iterations() const { return t_; }

 private:
  std::vector<AdamGroup> groups_;
  std::vector<double> m_, v_;
  double beta1_, beta2_, eps_;
  int t_ = 0;
};

}  // namespace dynsplat
