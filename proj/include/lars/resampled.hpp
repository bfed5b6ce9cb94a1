#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lars/acceptance.hpp"
#include "lars/distributions.hpp"
#include "lars/quadrature.hpp"

namespace lars {

inline constexpr double kZFloor = 1e-12;

// Number of proposals tried before the last one is accepted unconditionally.
// infinite() means plain rejection sampling (density p_inf).
class Truncation {
 public:
  static Truncation infinite() { return Truncation(0); }
  static Truncation after(std::size_t steps);

  bool is_infinite() const { return steps_ == 0; }
  // Only meaningful when finite.
  std::size_t steps() const { return steps_; }
  std::string str() const { return is_infinite() ? "inf" : std::to_string(steps_); }
  static Truncation parse(const std::string& s);

  bool operator==(const Truncation&) const = default;

 private:
  explicit Truncation(std::size_t steps) : steps_(steps) {}
  std::size_t steps_;
};

// Probability that T - 1 proposals are all rejected: (1 - Z)^(T-1); 0 for T = inf.
double alpha_T(double Z, Truncation T);
double log_alpha_T(double Z, Truncation T);

// log pi + log a - log Z
double log_p_infty(double log_pi, double log_a, double log_Z);
// log pi + log(a (1 - alpha) / Z + alpha), evaluated as a log-sum-exp of the
// two branches. Requires 0 < Z <= 1; Z is floored at kZFloor.
double log_p_T(double log_pi, double log_a, double Z, Truncation T);

// Tape forms. Z (or log Z) may be R x 1 or 1 x 1. In the truncated form Z is
// clamped to [kZFloor, 1 - kZFloor] so the gradient stays finite at Z = 1.
Var log_p_infty(Var log_pi, Var log_a, Var log_Z);
Var log_p_T(Var log_pi, Var log_a, Var Z, Truncation T);

// Expected number of proposals per returned sample:
// (1 - (1 - Z)^T) / Z, or 1 / Z for T = inf.
double expected_steps(double Z, Truncation T);

// Proposal pi, acceptance a and truncation T. The normalizer Z is passed in
// explicitly; estimating it is the z-estimator's job.
class ResampledDensity {
 public:
  ResampledDensity(const Proposal& proposal, const Acceptance& acceptance, Truncation T);

  const Proposal& proposal() const { return *proposal_; }
  const Acceptance& acceptance() const { return *acceptance_; }
  Truncation truncation() const { return T_; }
  std::size_t dim() const { return proposal_->dim(); }

  Var log_prob(Tape& tape, Var z, Var Z) const;
  std::vector<double> log_prob(const ParamStore& params, const Matrix& z, double Z) const;

 private:
  const Proposal* proposal_;
  const Acceptance* acceptance_;
  Truncation T_;
};

struct TruncatedDraw {
  std::vector<double> z;
  std::size_t steps = 0;
  // false when the T-th proposal was taken without an accept test
  bool accepted = true;
};

inline constexpr std::uint64_t kStarvationCap = 10'000'000;

// Accept/reject sampler. Proposals, their acceptance values and the uniforms
// are drawn a block at a time and consumed in order; the draws depend on
// the block size.
class TruncatedSampler {
 public:
  TruncatedSampler(const ResampledDensity& rd, const ParamStore& params, Rng rng, std::size_t block = 256);
  TruncatedDraw next();

 private:
  void refill();

  const ResampledDensity* rd_;
  const ParamStore* params_;
  Rng rng_;
  std::size_t block_;
  Matrix z_;
  std::vector<double> a_;
  std::vector<double> u_;
  std::size_t pos_ = 0;
};

std::vector<TruncatedDraw> sample_truncated(const ResampledDensity& rd, const ParamStore& params, std::size_t n,
                                            Rng& rng);

struct RsEmulationReport {
  double c = 0.0;       // 1 / max over grid of q / pi
  double z_quad = 0.0;  // quadrature of pi * a*
  double kl = 0.0;      // KL(q || p_inf) with a* = c q / pi
  bool ok = false;
  std::string failure;
};

// Builds the classical rejection-sampling acceptance a* = c q / pi and
// checks by quadrature that the resampled density recovers q with Z = c.
RsEmulationReport classical_rs_emulation_check(const Density& q, const Density& pi, const GridSpec& grid);

}  // namespace lars
