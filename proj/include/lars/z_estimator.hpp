#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "lars/resampled.hpp"

namespace lars {

struct ZEstimatorState {
  double ema = 0.5;
  double epsilon = 0.1;
  std::size_t train_S = 1024;
  std::uint64_t eval_S = 100'000'000;
  bool antithetic = false;
  // importance ratios that hit the cap so far
  std::size_t capped_ratios = 0;
};

// Importance ratios pi/q above this are clipped.
inline constexpr double kRatioCap = 1e6;

struct McOptions {
  // Draws per shard. Shard b always uses stream shard(b) of the seed and
  // shard sums are reduced in ascending order, so the estimate depends on
  // (seed, S, block) but not on the thread count.
  std::size_t block = 100'000;
  bool antithetic = false;
  bool parallel = true;
};

// (1/S) sum_s a(z_s), z_s ~ pi. With antithetic sampling each base draw z
// contributes both a(z) and a(-z) (S must be even, proposal symmetric).
double mc_estimate_Z(const Proposal& pi, const Acceptance& a, const ParamStore& params, std::uint64_t S,
                     std::uint64_t seed, const McOptions& opts = {});

struct ZTracePoint {
  std::uint64_t S = 0;
  double Z = 0.0;
};

// checkpoints {1, 2, ..., 9} x 10^k from 10^3 up to S_max, plus S_max.
std::vector<std::uint64_t> log_checkpoints(std::uint64_t S_max, std::uint64_t first = 1000);

// Running mean of a(z_s) reported at each (ascending) checkpoint.
std::vector<ZTracePoint> z_trace(const Proposal& pi, const Acceptance& a, const ParamStore& params,
                                 const std::vector<std::uint64_t>& checkpoints, std::uint64_t seed,
                                 bool antithetic = false);

void write_z_trace_csv(const std::filesystem::path& path, const std::vector<ZTracePoint>& trace);

struct BatchLogZ {
  Var z_r;              // R x 1, forward value Z_smooth, gradient of Z_curr
  Var z_curr;           // R x 1
  Var log_z_objective;  // 1 x 1, mean of log z_r
  double z_S = 0.0;
  double new_ema = 0.0;
  std::size_t capped = 0;
};

// Training-time normalizer for a batch of R posterior (or target) samples
// z_r with log-densities log_q_r (R x 1):
//   Z_S      = mean of a over train_S fresh proposal draws
//   Z_curr,r = (S Z_S + [pi(z_r)/q(z_r)] a(z_r)) / (S + 1)
//   Z_smooth = (1 - eps) ema + eps Z_curr,r
//   Z_r      = Z_curr,r + [Z_smooth,r - Z_curr,r]
// where [.] blocks gradients. Everything else, including the ratio
// pi(z_r)/q(z_r) below its cap, is differentiated. The new ema is the batch
// mean of Z_smooth; it is written back to `state` when `update` is set. Proposal draws come
// from `rng`. An acceptance with a known normalizer c short-circuits to
// Z_curr = c.
BatchLogZ batch_logZ(Tape& tape, const ResampledDensity& rd, ZEstimatorState& state, Var z_r, Var log_q_r, Rng& rng,
                     bool update = true);

}  // namespace lars
