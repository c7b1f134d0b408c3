#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "compc/error.hpp"

namespace compc {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam moments for one parameter block.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t size, AdamOptions options) : options_(options), m_(size, 0.0), v_(size, 0.0) {}

  void step(std::span<double> params, std::span<const double> grads) {
    require(params.size() == m_.size() && grads.size() == m_.size(), "Adam: block size mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = options_.beta1 * m_[i] + (1.0 - options_.beta1) * grads[i];
      v_[i] = options_.beta2 * v_[i] + (1.0 - options_.beta2) * grads[i] * grads[i];
      params[i] -= options_.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + options_.epsilon);
    }
  }

  std::int64_t steps() const { return t_; }
  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }
  AdamOptions& options() { return options_; }

 private:
  AdamOptions options_;
  std::vector<double> m_, v_;
  std::int64_t t_ = 0;
};

}  // namespace compc
