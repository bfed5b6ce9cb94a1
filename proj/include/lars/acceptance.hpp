#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "lars/autodiff.hpp"
#include "lars/mlp.hpp"

namespace lars {

// Acceptance function a(z) in (0, 1], expressed through its logit so that
// log a = log_logistic(logit) stays finite.
class Acceptance {
 public:
  virtual ~Acceptance() = default;
  virtual std::size_t dim() const = 0;
  virtual Var logit(Tape& tape, Var z) const = 0;  // R x 1
  virtual void init(ParamStore&, Rng&) const {}
  // Exact value of E_pi[a] when it does not depend on pi (constant a).
  virtual std::optional<double> known_normalizer() const { return std::nullopt; }

  Var log_a(Tape& tape, Var z) const { return log_logistic(logit(tape, z)); }
  Var a(Tape& tape, Var z) const { return logistic(logit(tape, z)); }
};

// a(z) = logistic(mlp(z)) with tanh hidden layers.
class AcceptanceNet final : public Acceptance {
 public:
  AcceptanceNet(std::size_t dim, std::vector<std::size_t> hidden, std::string prefix = "acc");

  std::size_t dim() const override { return net_.spec().input_dim; }
  Var logit(Tape& tape, Var z) const override { return net_.preactivation(tape, z); }
  void init(ParamStore& store, Rng& rng) const override { net_.init(store, rng); }

  const Mlp& net() const { return net_; }

 private:
  Mlp net_;
};

// a(z) = c. Lets LARS reduce exactly to its proposal in tests and baselines.
class ConstantAcceptance final : public Acceptance {
 public:
  ConstantAcceptance(std::size_t dim, double c);
  std::size_t dim() const override { return dim_; }
  Var logit(Tape& tape, Var z) const override;
  std::optional<double> known_normalizer() const override { return c_; }
  double value() const { return c_; }

 private:
  std::size_t dim_;
  double c_;
};

// a(z) = logistic(z . w + b) with fixed weights; a closed-form test double.
class LinearLogitAcceptance final : public Acceptance {
 public:
  LinearLogitAcceptance(std::vector<double> weights, double bias);
  std::size_t dim() const override { return w_.size(); }
  Var logit(Tape& tape, Var z) const override;

 private:
  std::vector<double> w_;
  double b_;
};

// Evaluation helpers, one value per row of z.
std::vector<double> acceptance_values(const Acceptance& acc, const ParamStore& params, const Matrix& z);
std::vector<double> log_acceptance_values(const Acceptance& acc, const ParamStore& params, const Matrix& z);

}  // namespace lars
