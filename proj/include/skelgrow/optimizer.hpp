#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "skelgrow/errors.hpp"

namespace skelgrow {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adaptive moment estimation over one flat parameter array.
class Adam {
 public:
  Adam() = default;
  explicit Adam(size_t size) : m_(size, 0.0), v_(size, 0.0) {}

  size_t size() const { return m_.size(); }
  long step_count() const { return t_; }

  void step(std::span<double> params, std::span<const double> grads, const AdamConfig& cfg) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
      throw ValidationError("Adam::step: size mismatch");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
    for (size_t i = 0; i < m_.size(); ++i) {
      m_[i] = cfg.beta1 * m_[i] + (1.0 - cfg.beta1) * grads[i];
      v_[i] = cfg.beta2 * v_[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
      const double m_hat = m_[i] / bc1;
      const double v_hat = v_[i] / bc2;
      params[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }

  /// Remaps moments when the parameter array is restructured (grown
  /// columns, cloned or pruned points). source_of_new[i] is the old flat
  /// index feeding new slot i, or -1 for a fresh zero-moment slot.
  void reindex(const std::vector<int>& source_of_new) {
    std::vector<double> m(source_of_new.size(), 0.0);
    std::vector<double> v(source_of_new.size(), 0.0);
    for (size_t i = 0; i < source_of_new.size(); ++i) {
      const int src = source_of_new[i];
      if (src >= 0) {
        m[i] = m_[src];
        v[i] = v_[src];
      }
    }
    m_ = std::move(m);
    v_ = std::move(v);
  }

 private:
  std::vector<double> m_;
  std::vector<double> v_;
  long t_ = 0;
};

}  // namespace skelgrow
