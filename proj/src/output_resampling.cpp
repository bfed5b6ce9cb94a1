#include "lars/output_resampling.hpp"

#include <algorithm>
#include <numeric>

#include "lars/distributions.hpp"
#include "lars/errors.hpp"

namespace lars {

OutputResampler::OutputResampler(std::size_t data_dim, OutputResamplingConfig cfg) : cfg_(std::move(cfg)) {
  LARS_REQUIRE(cfg_.train_S >= 1, "output resampling needs train_S >= 1");
  LARS_REQUIRE(cfg_.epsilon > 0.0 && cfg_.epsilon <= 1.0, "epsilon must lie in (0, 1]");
  if (cfg_.constant_acceptance > 0.0)
    acceptance_ = std::make_unique<ConstantAcceptance>(data_dim, cfg_.constant_acceptance);
  else
    acceptance_ = std::make_unique<AcceptanceNet>(data_dim, cfg_.hidden, "out.acc");
}

void OutputResampler::init(VaeModel& model, std::uint64_t seed) const {
  Rng rng = Rng(seed).substream("init.out.acc");
  acceptance_->init(model.params, rng);
}

Matrix OutputResampler::sample_outputs(const VaeModel& model, std::size_t n, Rng& rng) const {
  Matrix z;
  if (model.acceptance()) {
    const auto draws = sample_truncated(model.prior_density(), model.params, n, rng);
    z = Matrix(n, model.config().d_z);
    for (std::size_t i = 0; i < n; ++i) std::copy(draws[i].z.begin(), draws[i].z.end(), z.row_span(i).begin());
  } else {
    z = BoundProposal(model.proposal(), model.params).sample(n, rng);
  }
  Tape tape(model.params);
  const Matrix p = logistic(model.decode_logits(tape, tape.constant(z))).value();
  Matrix x(p.rows, p.cols);
  for (std::size_t i = 0; i < p.size(); ++i) x.data[i] = rng.uniform() < p.data[i] ? 1.0 : 0.0;
  return x;
}

Var OutputResampler::log_correction(Tape& tape, const Matrix& x, Var Z) const {
  const Var log_a = acceptance_->log_a(tape, tape.constant(x));
  return log_p_T(tape.constant(Matrix(x.rows, 1)), log_a, Z, cfg_.truncation);
}

Var OutputResampler::training_term(Tape& tape, const VaeModel& model, const Matrix& x, Rng& rng) {
  Var z_r;
  if (const auto c = acceptance_->known_normalizer()) {
    z_r = tape.constant(*c);
    z_ema = *c;
  } else {
    const Matrix xs = sample_outputs(model, cfg_.train_S, rng);
    const Var z_curr = mean(acceptance_->a(tape, tape.constant(xs)));
    const double smooth = cfg_.epsilon * z_curr.scalar() + (1.0 - cfg_.epsilon) * z_ema;
    z_r = z_curr + stop_gradient(add_scalar(neg(z_curr), smooth));
    z_ema = smooth;
  }
  return log_correction(tape, x, z_r);
}

double OutputResampler::estimate_Z(const VaeModel& model, std::size_t S, std::uint64_t seed, std::size_t block) {
  LARS_REQUIRE(S >= 1 && block >= 1, "estimate_Z: S and block must be positive");
  if (const auto c = acceptance_->known_normalizer()) return z_eval = *c;
  Rng rng(seed);
  double sum = 0.0;
  for (std::size_t done = 0; done < S;) {
    const std::size_t m = std::min(block, S - done);
    const auto a = acceptance_values(*acceptance_, model.params, sample_outputs(model, m, rng));
    sum += std::accumulate(a.begin(), a.end(), 0.0);
    done += m;
  }
  return z_eval = sum / static_cast<double>(S);
}

OutputEval evaluate_output_resampled(const VaeModel& model, const OutputResampler& out, const Matrix& x,
                                     std::uint64_t seed) {
  OutputEval ev;
  ev.plain = evaluate(model, x, 0, seed, "output");
  Tape tape(model.params);
  const Var c = out.log_correction(tape, x, tape.constant(out.z_eval));
  ev.per_point_correction = c.value().data;
  ev.correction = std::accumulate(ev.per_point_correction.begin(), ev.per_point_correction.end(), 0.0) /
                  static_cast<double>(x.rows);
  ev.bound = ev.plain.elbo + ev.correction;
  return ev;
}

}  // namespace lars
