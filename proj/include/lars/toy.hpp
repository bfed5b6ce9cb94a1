#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "lars/distributions.hpp"
#include "lars/params.hpp"
#include "lars/quadrature.hpp"
#include "lars/resampled.hpp"
#include "lars/z_estimator.hpp"

namespace lars {

struct MogCalibration {
  double sigma = 0.0;
  double kl = 0.0;  // quadrature KL(mog || N(0, I)) at sigma
};

// Picks the shared component std of the 3 x 3 grid mixture (means in
// {-spacing, 0, spacing}^2) whose KL to N(0, I) is closest to target_kl:
// a coarse sweep over [lo, hi] followed by bisection on the bracketing cell.
MogCalibration calibrate_mog(double spacing, double target_kl, double lo, double hi, const GridSpec& grid);

enum class ToyProposal { kStandardNormal, kRealNvp };

struct ToyConfig {
  double mog_spacing = 1.0;
  double mog_target_kl = 1.8;
  double mog_sigma_lo = 0.05;
  double mog_sigma_hi = 1.0;
  // > 0 skips calibration
  double mog_sigma = 0.0;

  ToyProposal proposal = ToyProposal::kStandardNormal;
  std::vector<std::size_t> acceptance_hidden = {10, 10};
  std::size_t flow_couplings = 4;
  std::vector<std::size_t> flow_hidden = {100, 100};
  bool train_acceptance = true;  // false: a fixed at 1 (proposal-only baseline)
  bool train_flow = true;

  std::size_t batch = 128;
  std::size_t iterations = 200'000;
  double lr = 3e-4;
  std::size_t train_S = 1024;
  double epsilon = 0.1;
  // finite T trains on log p_T instead of log p_inf
  Truncation truncation = Truncation::infinite();

  GridSpec grid;                            // reported KLs and Z
  bool grid_check = true;                   // refine-grid convergence check
  GridSpec export_grid{-8.0, 8.0, 200};     // density CSVs
  // held-out loss every `window` iterations (0 disables)
  std::size_t window = 0;
  std::size_t window_samples = 4096;
  std::uint64_t window_S = 100'000;
};

struct WindowStat {
  std::size_t iteration = 0;
  double heldout_loss = 0.0;  // -mean(log pi + log a) + log Z (MC, fixed draws)
  double z_ema = 0.0;
};

struct ToyReport {
  double kl_q_pi = 0.0;  // target vs proposal
  double kl_q_p = 0.0;   // target vs resampled density
  double z_quad = 0.0;
  double z_ema = 0.0;  // averaged over the last 1000 iterations
  double sigma_mog = 0.0;
  bool converged = true;  // quadrature self-check
  std::size_t capped_ratios = 0;
  double seconds = 0.0;
  std::vector<WindowStat> windows;
};

struct ToyResult {
  ParamStore params;
  ToyReport report;
  GridColumns grids;  // x, y, logq, logpi, a, logp on export_grid
};

// Negative fit objective on target samples x (log q their target
// log-densities): -mean(log pi + log a) + mean log Z_r for T = inf, and
// -mean log p_T with Z_r otherwise. Z_r comes from batch_logZ.
Var fit_loss(Tape& tape, const ResampledDensity& rd, ZEstimatorState& state, const Matrix& x,
             const std::vector<double>& log_q, Rng& z_rng, bool update = true);

ToyResult fit_to_target(const ToyConfig& cfg, std::uint64_t seed);
// Same objective with a RealNVP proposal trained together with a.
ToyResult fit_joint_realnvp(const ToyConfig& cfg, std::uint64_t seed);

void write_toy_report_csv(const std::filesystem::path& path, const ToyReport& report);

}  // namespace lars
