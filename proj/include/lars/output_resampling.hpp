#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "lars/acceptance.hpp"
#include "lars/resampled.hpp"
#include "lars/vae.hpp"

namespace lars {

struct OutputResamplingConfig {
  std::vector<std::size_t> hidden = {300, 300};
  Truncation truncation = Truncation::after(100);
  std::size_t train_S = 128;
  double epsilon = 0.1;
  // > 0: constant output acceptance instead of a network
  double constant_acceptance = 0.0;
};

// Resamples the decoder's Bernoulli output with an acceptance a(x) on the
// data space. The normalizer is global: Z = E a(x_s), x_s ~ p(x|z_s),
// z_s ~ p(z). Draws x_s are treated as constants, so the correction term
// only sends gradient to the output acceptance ("out.acc.").
class OutputResampler {
 public:
  OutputResampler(std::size_t data_dim, OutputResamplingConfig cfg);

  const OutputResamplingConfig& config() const { return cfg_; }
  const Acceptance& acceptance() const { return *acceptance_; }

  // Adds the acceptance parameters to model.params.
  void init(VaeModel& model, std::uint64_t seed) const;

  // Binary data-space draws from the model's prior and decoder.
  Matrix sample_outputs(const VaeModel& model, std::size_t n, Rng& rng) const;

  // log(a(x)(1 - alpha)/Z + alpha) per row of x.
  Var log_correction(Tape& tape, const Matrix& x, Var Z) const;

  // Training-time term: batch estimate of Z from train_S fresh draws,
  // smoothed with the running average (value) while keeping the batch
  // estimate's gradient. Updates z_ema.
  Var training_term(Tape& tape, const VaeModel& model, const Matrix& x, Rng& rng);

  // Large-S estimate into z_eval.
  double estimate_Z(const VaeModel& model, std::size_t S, std::uint64_t seed, std::size_t block = 1000);

  double z_ema = 0.5;
  double z_eval = 1.0;

 private:
  OutputResamplingConfig cfg_;
  std::unique_ptr<Acceptance> acceptance_;
};

struct OutputEval {
  EvalRow plain;           // ELBO terms of the underlying model
  double correction = 0.0;  // mean log correction at z_eval
  double bound = 0.0;       // plain.elbo + correction
  std::vector<double> per_point_correction;
};

OutputEval evaluate_output_resampled(const VaeModel& model, const OutputResampler& out, const Matrix& x,
                                     std::uint64_t seed);

}  // namespace lars
