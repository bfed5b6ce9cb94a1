#include "lars/adam.hpp"

#include <cmath>

#include "lars/errors.hpp"

namespace lars {

Adam::Adam(const ParamStore& store, AdamConfig config) : config_(config) {
  LARS_REQUIRE(config.lr > 0 && config.eps > 0, "Adam: lr and eps must be positive");
  LARS_REQUIRE(config.beta1 > 0 && config.beta1 < 1 && config.beta2 > 0 && config.beta2 < 1,
               "Adam: betas must lie in (0, 1)");
  for (const auto& e : store.entries()) {
    m_.emplace_back(e.size(), 0.0);
    v_.emplace_back(e.size(), 0.0);
  }
}

void Adam::step(ParamStore& store) {
  LARS_REQUIRE(store.size() == m_.size(), "Adam: parameter store layout changed");
  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& e = store.at(i);
    if (!e.trainable) continue;
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < e.size(); ++j) {
      const double g = e.grads[j];
      m[j] = b1 * m[j] + (1.0 - b1) * g;
      v[j] = b2 * v[j] + (1.0 - b2) * g * g;
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      e.values[j] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

}  // namespace lars
