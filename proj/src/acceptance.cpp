#include "lars/acceptance.hpp"

#include <cmath>
#include <limits>

#include "lars/errors.hpp"

namespace lars {

AcceptanceNet::AcceptanceNet(std::size_t dim, std::vector<std::size_t> hidden, std::string prefix)
    : net_(MlpSpec{dim, std::move(hidden), 1, HiddenActivation::kTanh, OutputActivation::kLogistic},
           std::move(prefix)) {}

ConstantAcceptance::ConstantAcceptance(std::size_t dim, double c) : dim_(dim), c_(c) {
  LARS_REQUIRE(c > 0.0 && c <= 1.0, "constant acceptance must lie in (0, 1]");
}

Var ConstantAcceptance::logit(Tape& tape, Var z) const {
  LARS_REQUIRE(z.cols() == dim_, "ConstantAcceptance: dimension mismatch");
  const double l = c_ == 1.0 ? std::numeric_limits<double>::infinity() : std::log(c_) - std::log1p(-c_);
  return tape.constant(Matrix(z.rows(), 1, l));
}

LinearLogitAcceptance::LinearLogitAcceptance(std::vector<double> weights, double bias)
    : w_(std::move(weights)), b_(bias) {
  LARS_REQUIRE(!w_.empty(), "LinearLogitAcceptance: empty weights");
}

Var LinearLogitAcceptance::logit(Tape& tape, Var z) const {
  LARS_REQUIRE(z.cols() == w_.size(), "LinearLogitAcceptance: dimension mismatch");
  return affine(z, tape.constant(Matrix(w_.size(), 1, w_)), tape.constant(Matrix::scalar(b_)));
}

std::vector<double> acceptance_values(const Acceptance& acc, const ParamStore& params, const Matrix& z) {
  Tape tape(params);
  return acc.a(tape, tape.constant(z)).value().data;
}

std::vector<double> log_acceptance_values(const Acceptance& acc, const ParamStore& params, const Matrix& z) {
  Tape tape(params);
  return acc.log_a(tape, tape.constant(z)).value().data;
}

}  // namespace lars
