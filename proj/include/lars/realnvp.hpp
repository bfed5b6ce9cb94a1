#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lars/distributions.hpp"
#include "lars/mlp.hpp"

namespace lars {

struct RealNvpSpec {
  std::size_t dim = 2;
  std::size_t couplings = 4;
  std::vector<std::size_t> hidden = {100, 100};
};

// Stack of affine coupling layers over a standard-normal base.
//
// Layer k maps x = (x_a, x_b), with x_a the first floor(d/2) coordinates, to
//   y = (x_b * exp(s(x_a)) + t(x_a), x_a)
// i.e. the transformed half is moved to the front so the next layer
// conditions on it. s = c_k * tanh(net_s(x_a)) with a learnable scalar c_k.
// c_k = 0 and a zero last shift layer make the initial flow the identity.
class RealNvpFlow final : public Proposal {
 public:
  explicit RealNvpFlow(RealNvpSpec spec, std::string prefix = "flow");

  const RealNvpSpec& spec() const { return spec_; }
  const std::string& prefix() const { return prefix_; }
  std::size_t dim() const override { return spec_.dim; }

  void init(ParamStore& store, Rng& rng) const override;

  // base -> data; adds log|det df/du| per row to *log_det when given.
  Var forward(Tape& tape, Var base, Var* log_det = nullptr) const;
  // data -> base; adds log|det df^-1/dx| per row to *log_det when given.
  Var inverse(Tape& tape, Var x, Var* log_det = nullptr) const;

  Var log_prob(Tape& tape, Var x) const override;
  // Reparameterized: base noise pushed through forward().
  Var sample(Tape& tape, std::size_t n, Rng& rng) const override;

 private:
  Var scale_term(Tape& tape, std::size_t layer, Var cond) const;
  Var shift_term(Tape& tape, std::size_t layer, Var cond) const;
  std::string factor_name(std::size_t layer) const;

  RealNvpSpec spec_;
  std::string prefix_;
  std::size_t split_;
  std::vector<Mlp> scale_nets_;
  std::vector<Mlp> shift_nets_;
};

}  // namespace lars
