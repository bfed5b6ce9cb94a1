#include "lars/realnvp.hpp"

#include "lars/errors.hpp"

namespace lars {

RealNvpFlow::RealNvpFlow(RealNvpSpec spec, std::string prefix)
    : spec_(std::move(spec)), prefix_(std::move(prefix)), split_(spec_.dim / 2) {
  LARS_REQUIRE(spec_.dim >= 2, "RealNvpFlow: dimension must be at least 2");
  LARS_REQUIRE(spec_.couplings >= 1, "RealNvpFlow: need at least one coupling");
  const std::size_t rest = spec_.dim - split_;
  for (std::size_t k = 0; k < spec_.couplings; ++k) {
    const std::string base = prefix_ + ".c" + std::to_string(k);
    MlpSpec net{split_, spec_.hidden, rest, HiddenActivation::kTanh, OutputActivation::kIdentity};
    scale_nets_.emplace_back(net, base + ".s");
    shift_nets_.emplace_back(net, base + ".t");
  }
}

std::string RealNvpFlow::factor_name(std::size_t layer) const {
  return prefix_ + ".c" + std::to_string(layer) + ".scale";
}

void RealNvpFlow::init(ParamStore& store, Rng& rng) const {
  for (std::size_t k = 0; k < spec_.couplings; ++k) {
    scale_nets_[k].init(store, rng);
    shift_nets_[k].init(store, rng);
    // zero last shift layer: t(.) == 0 at init
    const auto& t = shift_nets_[k];
    auto& w = store.at(t.weight_name(t.spec().layer_count() - 1));
    std::fill(w.values.begin(), w.values.end(), 0.0);
    store.add(factor_name(k), {1});
  }
}

Var RealNvpFlow::scale_term(Tape& tape, std::size_t layer, Var cond) const {
  return mul(tanh(scale_nets_[layer].preactivation(tape, cond)), tape.param(factor_name(layer)));
}

Var RealNvpFlow::shift_term(Tape& tape, std::size_t layer, Var cond) const {
  return shift_nets_[layer].preactivation(tape, cond);
}

Var RealNvpFlow::forward(Tape& tape, Var base, Var* log_det) const {
  LARS_REQUIRE(base.cols() == spec_.dim, "RealNvpFlow: dimension mismatch");
  const std::size_t rest = spec_.dim - split_;
  Var x = base;
  for (std::size_t k = 0; k < spec_.couplings; ++k) {
    const Var cond = slice_cols(x, 0, split_);
    const Var moved = slice_cols(x, split_, rest);
    const Var s = scale_term(tape, k, cond);
    const Var t = shift_term(tape, k, cond);
    x = concat_cols(moved * exp(s) + t, cond);
    if (log_det) *log_det = log_det->valid() ? *log_det + row_sum(s) : row_sum(s);
  }
  return x;
}

Var RealNvpFlow::inverse(Tape& tape, Var x, Var* log_det) const {
  LARS_REQUIRE(x.cols() == spec_.dim, "RealNvpFlow: dimension mismatch");
  const std::size_t rest = spec_.dim - split_;
  Var y = x;
  for (std::size_t k = spec_.couplings; k-- > 0;) {
    const Var moved = slice_cols(y, 0, rest);
    const Var cond = slice_cols(y, rest, split_);
    const Var s = scale_term(tape, k, cond);
    const Var t = shift_term(tape, k, cond);
    y = concat_cols(cond, (moved - t) * exp(neg(s)));
    const Var ld = neg(row_sum(s));
    if (log_det) *log_det = log_det->valid() ? *log_det + ld : ld;
  }
  return y;
}

Var RealNvpFlow::log_prob(Tape& tape, Var x) const {
  Var log_det;
  const Var u = inverse(tape, x, &log_det);
  const Var base = add_scalar(scale(row_sum(square(u)), -0.5), -0.5 * static_cast<double>(spec_.dim) * kLog2Pi);
  return base + log_det;
}

Var RealNvpFlow::sample(Tape& tape, std::size_t n, Rng& rng) const {
  return forward(tape, tape.constant(rng.normal_matrix(n, spec_.dim)));
}

}  // namespace lars
