#include "lars/z_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "lars/errors.hpp"

namespace lars {

namespace {

// Sub-batch size for evaluating the acceptance network; bounds memory.
constexpr std::size_t kEvalChunk = 8192;

double sum_acceptance(const Proposal& pi, const Acceptance& a, const ParamStore& params, std::size_t n, Rng& rng,
                      bool antithetic) {
  double total = 0.0;
  for (std::size_t done = 0; done < n;) {
    const std::size_t m = std::min(kEvalChunk, n - done);
    Tape tape(params);
    const Var z = pi.sample(tape, m, rng);
    for (double v : a.a(tape, z).value().data) total += v;
    if (antithetic) {
      const Var mz = tape.constant(z.value());
      for (double v : a.a(tape, neg(mz)).value().data) total += v;
    }
    done += m;
  }
  return total;
}

}  // namespace

double mc_estimate_Z(const Proposal& pi, const Acceptance& a, const ParamStore& params, std::uint64_t S,
                     std::uint64_t seed, const McOptions& opts) {
  LARS_REQUIRE(S >= 1, "mc_estimate_Z: S must be >= 1");
  LARS_REQUIRE(opts.block >= 1, "mc_estimate_Z: block must be >= 1");
  if (opts.antithetic) {
    LARS_REQUIRE(pi.symmetric(), "antithetic sampling requires a symmetric proposal");
    LARS_REQUIRE(S % 2 == 0 && opts.block % 2 == 0, "antithetic sampling needs even S and block");
  }
  if (const auto c = a.known_normalizer()) return *c;

  const Rng root(seed);
  const std::uint64_t blocks = (S + opts.block - 1) / opts.block;
  std::vector<double> sums(blocks, 0.0);
  const auto run_block = [&](std::uint64_t b) {
    const std::uint64_t begin = b * opts.block;
    const std::uint64_t count = std::min<std::uint64_t>(opts.block, S - begin);
    Rng rng = root.shard(b);
    sums[b] = opts.antithetic ? sum_acceptance(pi, a, params, count / 2, rng, true)
                              : sum_acceptance(pi, a, params, count, rng, false);
  };
  if (opts.parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::uint64_t b = 0; b < blocks; ++b) run_block(b);
  } else {
    for (std::uint64_t b = 0; b < blocks; ++b) run_block(b);
  }
  double total = 0.0;
  for (double s : sums) total += s;
  return total / static_cast<double>(S);
}

std::vector<std::uint64_t> log_checkpoints(std::uint64_t S_max, std::uint64_t first) {
  std::vector<std::uint64_t> out;
  for (std::uint64_t decade = first; decade <= S_max; decade *= 10) {
    for (std::uint64_t k = 1; k <= 9; ++k) {
      const std::uint64_t s = k * decade;
      if (s > S_max) break;
      out.push_back(s);
    }
    if (decade > S_max / 10) break;
  }
  if (out.empty() || out.back() != S_max) out.push_back(S_max);
  return out;
}

std::vector<ZTracePoint> z_trace(const Proposal& pi, const Acceptance& a, const ParamStore& params,
                                 const std::vector<std::uint64_t>& checkpoints, std::uint64_t seed, bool antithetic) {
  LARS_REQUIRE(std::is_sorted(checkpoints.begin(), checkpoints.end()), "z_trace: checkpoints must be ascending");
  if (antithetic) LARS_REQUIRE(pi.symmetric(), "antithetic sampling requires a symmetric proposal");
  Rng rng(seed);
  std::vector<ZTracePoint> out;
  double total = 0.0;
  std::uint64_t seen = 0;
  for (std::uint64_t target : checkpoints) {
    LARS_REQUIRE(!antithetic || target % 2 == 0, "antithetic trace needs even checkpoints");
    if (const auto c = a.known_normalizer()) {
      out.push_back({target, *c});
      continue;
    }
    while (seen < target) {
      const std::uint64_t step = std::min<std::uint64_t>(target - seen, 100'000);
      total += antithetic ? sum_acceptance(pi, a, params, step / 2, rng, true)
                          : sum_acceptance(pi, a, params, step, rng, false);
      seen += step;
    }
    out.push_back({target, total / static_cast<double>(seen)});
  }
  return out;
}

void write_z_trace_csv(const std::filesystem::path& path, const std::vector<ZTracePoint>& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "S,Z_running\n" << std::setprecision(12);
  for (const auto& p : trace) out << p.S << ',' << p.Z << '\n';
}

BatchLogZ batch_logZ(Tape& tape, const ResampledDensity& rd, ZEstimatorState& state, Var z_r, Var log_q_r, Rng& rng,
                     bool update) {
  const std::size_t R = z_r.rows();
  LARS_REQUIRE(R > 0, "batch_logZ: empty batch");
  LARS_REQUIRE(log_q_r.rows() == R && log_q_r.cols() == 1, "batch_logZ: log_q_r must be R x 1");
  LARS_REQUIRE(state.epsilon > 0.0 && state.epsilon <= 1.0, "batch_logZ: epsilon must lie in (0, 1]");
  LARS_REQUIRE(state.train_S >= 1, "batch_logZ: train_S must be >= 1");

  BatchLogZ out;
  const double S = static_cast<double>(state.train_S);
  if (const auto c = rd.acceptance().known_normalizer()) {
    out.z_S = *c;
    out.z_curr = tape.constant(Matrix(R, 1, *c));
  } else {
    const Var z_s = rd.proposal().sample(tape, state.train_S, rng);
    const Var Z_S = mean(rd.acceptance().a(tape, z_s));
    out.z_S = Z_S.scalar();

    // importance weight pi(z_r) / q(z_r), capped; q is a constant, pi keeps
    // its gradient (flow proposals)
    const double log_cap = std::log(kRatioCap);
    const Var log_w = rd.proposal().log_prob(tape, z_r) - log_q_r;
    for (double v : log_w.value().data)
      if (v > log_cap) ++out.capped;
    const Var w = exp(clamp(log_w, -std::numeric_limits<double>::infinity(), log_cap));
    const Var reweighted = w * rd.acceptance().a(tape, z_r);
    out.z_curr = scale(add(scale(Z_S, S), reweighted), 1.0 / (S + 1.0));
  }

  // constant acceptance: every branch of the estimator equals c
  const double ema = rd.acceptance().known_normalizer() ? out.z_S : state.ema;
  const Var z_smooth = add_scalar(scale(out.z_curr, state.epsilon), (1.0 - state.epsilon) * ema);
  out.z_r = out.z_curr + stop_gradient(z_smooth - out.z_curr);
  out.log_z_objective = mean(log(clamp(out.z_r, kZFloor, std::numeric_limits<double>::infinity())));

  double m = 0.0;
  for (double v : z_smooth.value().data) m += v;
  out.new_ema = m / static_cast<double>(R);
  if (update) {
    state.ema = out.new_ema;
    state.capped_ratios += out.capped;
  }
  return out;
}

}  // namespace lars
