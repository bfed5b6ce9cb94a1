#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "lars/autodiff.hpp"
#include "lars/params.hpp"

namespace lars::testing {

// Worst central-difference mismatch over (up to `per_entry`) coordinates of
// every trainable entry. Mismatch is |analytic - numeric| measured against
// max(|analytic|, |numeric|, floor), so tiny gradients are compared in
// absolute terms.
struct FdResult {
  double worst = 0.0;
  std::string where;
  std::size_t checked = 0;
};

inline FdResult fd_check(ParamStore& params, const std::function<Var(Tape&)>& loss, double h = 1e-5,
                         std::size_t per_entry = 12, double floor = 1e-3) {
  params.zero_grads();
  {
    Tape tape(params);
    tape.backward(loss(tape));
  }
  FdResult r;
  for (auto& e : params.entries()) {
    if (!e.trainable) continue;
    const std::size_t n = e.values.size();
    const std::size_t stride = std::max<std::size_t>(1, n / per_entry);
    for (std::size_t i = 0; i < n; i += stride) {
      const double keep = e.values[i];
      e.values[i] = keep + h;
      double up = 0.0, down = 0.0;
      {
        Tape t(static_cast<const ParamStore&>(params));
        up = loss(t).scalar();
      }
      e.values[i] = keep - h;
      {
        Tape t(static_cast<const ParamStore&>(params));
        down = loss(t).scalar();
      }
      e.values[i] = keep;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = e.grads[i];
      const double err = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
      ++r.checked;
      if (err > r.worst) {
        r.worst = err;
        r.where = e.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return r;
}

}  // namespace lars::testing

namespace lars::testing {

// Upper 1% point of chi-square with `df` degrees of freedom
// (Wilson-Hilferty; a few percent accurate for df >= 3).
inline double chi2_critical_01(double df) {
  const double z = 2.3263478740408408;
  const double h = 2.0 / (9.0 * df);
  const double c = 1.0 - h + z * std::sqrt(h);
  return df * c * c * c;
}

}  // namespace lars::testing
