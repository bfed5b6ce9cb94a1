#include "lars/resampled.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lars/errors.hpp"

namespace lars {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log1mexp(double x) {
  if (x == kNegInf) return 0.0;
  return x > -0.6931471805599453 ? std::log(-std::expm1(x)) : std::log1p(-std::exp(x));
}

double logaddexp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

void check_Z(double Z) { LARS_REQUIRE(Z > 0.0 && Z <= 1.0, "Z must lie in (0, 1], got " + std::to_string(Z)); }

}  // namespace

Truncation Truncation::after(std::size_t steps) {
  LARS_REQUIRE(steps >= 1, "truncation T must be >= 1");
  return Truncation(steps);
}

Truncation Truncation::parse(const std::string& s) {
  if (s == "inf" || s == "infinity") return infinite();
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    throw ContractViolation("bad truncation value: " + s);
  }
  LARS_REQUIRE(used == s.size() && v >= 1, "bad truncation value: " + s);
  return after(static_cast<std::size_t>(v));
}

double log_alpha_T(double Z, Truncation T) {
  check_Z(Z);
  if (T.is_infinite()) return kNegInf;
  if (T.steps() == 1) return 0.0;
  return static_cast<double>(T.steps() - 1) * std::log1p(-std::max(Z, kZFloor));
}

double alpha_T(double Z, Truncation T) { return std::exp(log_alpha_T(Z, T)); }

double log_p_infty(double log_pi, double log_a, double log_Z) {
  LARS_REQUIRE(std::isfinite(log_Z), "log Z must be finite");
  return log_pi + log_a - std::max(log_Z, std::log(kZFloor));
}

double log_p_T(double log_pi, double log_a, double Z, Truncation T) {
  check_Z(Z);
  if (T.is_infinite()) return log_p_infty(log_pi, log_a, std::log(Z));
  if (T.steps() == 1) return log_pi;
  const double z = std::max(Z, kZFloor);
  const double la = log_alpha_T(z, T);
  return log_pi + logaddexp(log_a + log1mexp(la) - std::log(z), la);
}

Var log_p_infty(Var log_pi, Var log_a, Var log_Z) {
  return log_pi + log_a - clamp(log_Z, std::log(kZFloor), std::numeric_limits<double>::infinity());
}

Var log_p_T(Var log_pi, Var log_a, Var Z, Truncation T) {
  // Training estimates can overshoot 1 when an importance weight is large;
  // they are clamped rather than rejected.
  for (double v : Z.value().data) LARS_REQUIRE(v > 0.0, "Z must be positive");
  if (T.is_infinite()) return log_p_infty(log_pi, log_a, log(clamp(Z, kZFloor, 1.0)));
  if (T.steps() == 1) return log_pi;
  const Var z = clamp(Z, kZFloor, 1.0 - kZFloor);
  const Var la = scale(log(1.0 - z), static_cast<double>(T.steps() - 1));
  return log_pi + logaddexp(log_a + log1mexp(la) - log(z), la);
}

double expected_steps(double Z, Truncation T) {
  check_Z(Z);
  const double z = std::max(Z, kZFloor);
  if (T.is_infinite()) return 1.0 / z;
  // -expm1(T log1p(-z)) = 1 - (1 - z)^T without cancellation for tiny z
  return -std::expm1(static_cast<double>(T.steps()) * std::log1p(-z)) / z;
}

ResampledDensity::ResampledDensity(const Proposal& proposal, const Acceptance& acceptance, Truncation T)
    : proposal_(&proposal), acceptance_(&acceptance), T_(T) {
  LARS_REQUIRE(proposal.dim() == acceptance.dim(), "proposal and acceptance dimensions differ");
}

Var ResampledDensity::log_prob(Tape& tape, Var z, Var Z) const {
  return log_p_T(proposal_->log_prob(tape, z), acceptance_->log_a(tape, z), Z, T_);
}

std::vector<double> ResampledDensity::log_prob(const ParamStore& params, const Matrix& z, double Z) const {
  Tape tape(params);
  const Var zv = tape.constant(z);
  const auto lp = proposal_->log_prob(tape, zv).value().data;
  const auto la = acceptance_->log_a(tape, zv).value().data;
  std::vector<double> out(z.rows);
  for (std::size_t i = 0; i < z.rows; ++i) out[i] = log_p_T(lp[i], la[i], Z, T_);
  return out;
}

TruncatedSampler::TruncatedSampler(const ResampledDensity& rd, const ParamStore& params, Rng rng, std::size_t block)
    : rd_(&rd), params_(&params), rng_(std::move(rng)), block_(std::max<std::size_t>(1, block)) {}

void TruncatedSampler::refill() {
  Tape tape(*params_);
  const Var z = rd_->proposal().sample(tape, block_, rng_);
  a_ = rd_->acceptance().a(tape, z).value().data;
  z_ = z.value();
  u_.resize(block_);
  for (double& u : u_) u = rng_.uniform();
  pos_ = 0;
}

TruncatedDraw TruncatedSampler::next() {
  const Truncation T = rd_->truncation();
  TruncatedDraw d;
  for (std::uint64_t t = 1;; ++t) {
    if (pos_ == a_.size()) refill();
    const std::size_t i = pos_++;
    const auto row = z_.row_span(i);
    if (!T.is_infinite() && t == T.steps()) {
      d.z.assign(row.begin(), row.end());
      d.steps = t;
      d.accepted = false;
      return d;
    }
    if (u_[i] < a_[i]) {
      d.z.assign(row.begin(), row.end());
      d.steps = t;
      d.accepted = true;
      return d;
    }
    if (T.is_infinite() && t >= kStarvationCap)
      throw SamplerStarvation("no proposal accepted within " + std::to_string(kStarvationCap) + " draws");
  }
}

std::vector<TruncatedDraw> sample_truncated(const ResampledDensity& rd, const ParamStore& params, std::size_t n,
                                            Rng& rng) {
  // child stream seeded from the caller's engine, so repeated calls differ
  TruncatedSampler s(rd, params, Rng(rng.next_u64()));
  std::vector<TruncatedDraw> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(s.next());
  return out;
}

RsEmulationReport classical_rs_emulation_check(const Density& q, const Density& pi, const GridSpec& grid) {
  LARS_REQUIRE(q.dim() == 2 && pi.dim() == 2, "classical RS emulation is a 2D check");
  RsEmulationReport r;
  const auto log_q = evaluate_on_grid(log_density_of(q), grid);
  const auto log_pi = evaluate_on_grid(log_density_of(pi), grid);
  double max_ratio = kNegInf;
  for (std::size_t i = 0; i < log_q.size(); ++i) {
    if (log_q[i] == kNegInf) continue;
    max_ratio = std::max(max_ratio, log_q[i] - log_pi[i]);
  }
  if (!std::isfinite(max_ratio)) {
    r.failure = "density ratio q/pi unbounded on grid";
    return r;
  }
  const double log_c = -max_ratio;
  r.c = std::exp(log_c);
  // a* = c q / pi, so pi a* = c q and p_inf = pi a* / Z
  std::vector<double> log_pi_a(log_q.size());
  for (std::size_t i = 0; i < log_q.size(); ++i) log_pi_a[i] = log_c + log_q[i];
  r.z_quad = integrate_exp(log_pi_a, grid);
  std::vector<double> log_p(log_q.size());
  for (std::size_t i = 0; i < log_q.size(); ++i) log_p[i] = log_pi_a[i] - std::log(r.z_quad);
  r.kl = quadrature_kl(log_q, log_p, grid);
  r.ok = std::abs(r.kl) < 1e-3 && std::abs(r.z_quad - r.c) < 1e-3;
  if (!r.ok) r.failure = "emulation outside tolerance";
  return r;
}

}  // namespace lars
