#include "lars/mlp.hpp"

#include <cmath>

#include "lars/errors.hpp"

namespace lars {

void MlpSpec::validate() const {
  LARS_REQUIRE(input_dim > 0 && output_dim > 0, "MLP dimensions must be positive");
  for (std::size_t h : hidden) LARS_REQUIRE(h > 0, "MLP hidden widths must be positive");
}

Mlp::Mlp(MlpSpec spec, std::string prefix) : spec_(std::move(spec)), prefix_(std::move(prefix)) { spec_.validate(); }

void Mlp::init(ParamStore& store, Rng& rng) const {
  for (std::size_t l = 0; l < spec_.layer_count(); ++l) {
    const std::size_t in = spec_.fan_in(l);
    const std::size_t out = spec_.fan_out(l);
    auto& w = store.add(weight_name(l), {in, out});
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (double& v : w.values) v = (2.0 * rng.uniform() - 1.0) * limit;
    store.add(bias_name(l), {out});
  }
}

Var Mlp::preactivation(Tape& tape, Var input) const {
  LARS_REQUIRE(input.cols() == spec_.input_dim, prefix_ + ": input width mismatch");
  Var h = input;
  for (std::size_t l = 0; l < spec_.layer_count(); ++l) {
    h = affine(h, tape.param(weight_name(l)), tape.param(bias_name(l)));
    if (l + 1 < spec_.layer_count()) h = spec_.hidden_activation == HiddenActivation::kTanh ? tanh(h) : relu(h);
  }
  return h;
}

Var Mlp::forward(Tape& tape, Var input) const {
  Var out = preactivation(tape, input);
  return spec_.output_activation == OutputActivation::kLogistic ? logistic(out) : out;
}

ParamStore glorot_init(const MlpSpec& spec, std::uint64_t seed) {
  ParamStore store;
  Rng rng(seed);
  Mlp(spec, "mlp").init(store, rng);
  return store;
}

Matrix mlp_forward(const ParamStore& params, const Mlp& net, const Matrix& input) {
  Tape tape(params);
  return net.forward(tape, tape.constant(input)).value();
}

}  // namespace lars
