#pragma once

#include <cstddef>
#include <vector>

#include "lars/params.hpp"

namespace lars {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment buffers mirror the store's entries;
// non-trainable entries are skipped. Gradients are left untouched.
class Adam {
 public:
  Adam(const ParamStore& store, AdamConfig config);

  void step(ParamStore& store);

  std::size_t step_count() const { return step_; }
  double lr() const { return config_.lr; }
  void set_lr(double lr) { config_.lr = lr; }
  const AdamConfig& config() const { return config_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  AdamConfig config_;
  std::size_t step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace lars
