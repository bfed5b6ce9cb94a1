#include "lars/toy.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>

#include "lars/acceptance.hpp"
#include "lars/adam.hpp"
#include "lars/errors.hpp"
#include "lars/realnvp.hpp"
#include "lars/z_estimator.hpp"

namespace lars {

Var fit_loss(Tape& tape, const ResampledDensity& rd, ZEstimatorState& state, const Matrix& x,
             const std::vector<double>& log_q, Rng& z_rng, bool update) {
  LARS_REQUIRE(log_q.size() == x.rows, "fit_loss: one log q per sample");
  const Var xv = tape.constant(x);
  const Var lq = tape.constant(Matrix(x.rows, 1, log_q));
  const Var log_pi = rd.proposal().log_prob(tape, xv);
  const Var log_a = rd.acceptance().log_a(tape, xv);
  const BatchLogZ bz = batch_logZ(tape, rd, state, xv, lq, z_rng, update);
  if (rd.truncation().is_infinite()) return neg(mean(log_pi + log_a) - bz.log_z_objective);
  return neg(mean(log_p_T(log_pi, log_a, bz.z_r, rd.truncation())));
}

namespace {

double mog_kl_to_standard(double spacing, double sigma, const GridSpec& grid) {
  const MogTarget mog = MogTarget::grid3x3(spacing, sigma);
  const StandardNormal normal(2);
  return quadrature_kl(log_density_of(mog), log_density_of(normal), grid, false).kl;
}

struct GridEval {
  std::vector<double> log_q, log_pi, log_a, log_p;
  double z = 0.0;
  double kl_q_pi = 0.0;
  double kl_q_p = 0.0;
};

GridEval evaluate_toy(const MogTarget& target, const ResampledDensity& rd, const ParamStore& params,
                      const GridSpec& grid) {
  GridEval e;
  e.log_q = evaluate_on_grid(log_density_of(target), grid);
  const BoundProposal pi(rd.proposal(), params);
  e.log_pi = evaluate_on_grid(log_density_of(pi), grid);
  e.log_a = evaluate_on_grid(
      [&](const Matrix& x) { return log_acceptance_values(rd.acceptance(), params, x); }, grid);
  std::vector<double> log_pi_a(e.log_q.size());
  for (std::size_t i = 0; i < log_pi_a.size(); ++i) log_pi_a[i] = e.log_pi[i] + e.log_a[i];
  e.z = std::min(1.0, integrate_exp(log_pi_a, grid));
  e.log_p.resize(e.log_q.size());
  for (std::size_t i = 0; i < e.log_p.size(); ++i) e.log_p[i] = log_p_T(e.log_pi[i], e.log_a[i], e.z, rd.truncation());
  e.kl_q_pi = quadrature_kl(e.log_q, e.log_pi, grid);
  e.kl_q_p = quadrature_kl(e.log_q, e.log_p, grid);
  return e;
}

ToyResult run_toy(const ToyConfig& cfg, std::uint64_t seed) {
  LARS_REQUIRE(cfg.batch >= 1 && cfg.train_S >= 1, "toy: batch and train_S must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  const Rng root(seed);

  ToyResult result;
  ToyReport& rep = result.report;
  rep.sigma_mog = cfg.mog_sigma > 0.0
                      ? cfg.mog_sigma
                      : calibrate_mog(cfg.mog_spacing, cfg.mog_target_kl, cfg.mog_sigma_lo, cfg.mog_sigma_hi, cfg.grid)
                            .sigma;
  const MogTarget target = MogTarget::grid3x3(cfg.mog_spacing, rep.sigma_mog);

  std::unique_ptr<Proposal> proposal;
  if (cfg.proposal == ToyProposal::kRealNvp)
    proposal = std::make_unique<RealNvpFlow>(RealNvpSpec{2, cfg.flow_couplings, cfg.flow_hidden}, "flow");
  else
    proposal = std::make_unique<StandardNormal>(2);
  std::unique_ptr<Acceptance> acceptance;
  if (cfg.train_acceptance)
    acceptance = std::make_unique<AcceptanceNet>(2, cfg.acceptance_hidden, "acc");
  else
    acceptance = std::make_unique<ConstantAcceptance>(2, 1.0);
  const ResampledDensity rd(*proposal, *acceptance, cfg.truncation);

  ParamStore& params = result.params;
  {
    Rng init_flow = root.substream("init.flow");
    Rng init_acc = root.substream("init.acc");
    proposal->init(params, init_flow);
    acceptance->init(params, init_acc);
  }
  if (!cfg.train_flow) params.set_trainable("flow", false);

  ZEstimatorState zs;
  zs.epsilon = cfg.epsilon;
  zs.train_S = cfg.train_S;

  Adam adam(params, AdamConfig{cfg.lr});
  Rng data_rng = root.substream("data");
  Rng z_rng = root.substream("z");

  // held-out monitor: fixed target samples and fixed MC draws
  Rng heldout_rng = root.substream("heldout");
  const Matrix heldout = cfg.window > 0 ? target.sample(cfg.window_samples, heldout_rng) : Matrix();
  const std::uint64_t mc_seed = root.substream("heldout.mc").seed();

  const std::size_t tail = std::min<std::size_t>(1000, cfg.iterations);
  double ema_tail = 0.0;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const Matrix x = target.sample(cfg.batch, data_rng);
    const auto log_q = target.log_prob(x);
    params.zero_grads();
    Tape tape(params);
    const Var loss = fit_loss(tape, rd, zs, x, log_q, z_rng);
    if (!std::isfinite(loss.scalar())) throw TrainingDiverged("non-finite toy loss", it);
    tape.backward(loss);
    adam.step(params);
    if (it + tail >= cfg.iterations) ema_tail += zs.ema;

    if (cfg.window > 0 && (it + 1) % cfg.window == 0) {
      Tape et(static_cast<const ParamStore&>(params));
      const Var hv = et.constant(heldout);
      double fit = 0.0;
      const auto lp = proposal->log_prob(et, hv).value().data;
      const auto la = acceptance->log_a(et, hv).value().data;
      for (std::size_t i = 0; i < lp.size(); ++i) fit += lp[i] + la[i];
      const double z = mc_estimate_Z(*proposal, *acceptance, params, cfg.window_S, mc_seed);
      rep.windows.push_back({it + 1, -fit / static_cast<double>(lp.size()) + std::log(z), zs.ema});
    }
  }
  rep.z_ema = tail > 0 ? ema_tail / static_cast<double>(tail) : zs.ema;
  rep.capped_ratios = zs.capped_ratios;

  const GridEval e = evaluate_toy(target, rd, params, cfg.grid);
  rep.kl_q_pi = e.kl_q_pi;
  rep.kl_q_p = e.kl_q_p;
  rep.z_quad = e.z;
  if (cfg.grid_check) {
    const GridEval f = evaluate_toy(target, rd, params, cfg.grid.refined());
    rep.converged = std::abs(f.kl_q_p - e.kl_q_p) <= 1e-3 && std::abs(f.kl_q_pi - e.kl_q_pi) <= 1e-3;
  }

  const GridEval g = evaluate_toy(target, rd, params, cfg.export_grid);
  std::vector<double> a(g.log_a.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::exp(g.log_a[i]);
  result.grids = GridColumns{cfg.export_grid, {"logq", "logpi", "a", "logp"}, {g.log_q, g.log_pi, a, g.log_p}};

  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace

MogCalibration calibrate_mog(double spacing, double target_kl, double lo, double hi, const GridSpec& grid) {
  LARS_REQUIRE(lo > 0.0 && hi > lo, "calibrate_mog: bad sigma range");
  constexpr int kSweep = 96;
  std::vector<double> sig(kSweep + 1), kl(kSweep + 1);
  std::size_t best = 0;
  for (int i = 0; i <= kSweep; ++i) {
    sig[i] = lo + (hi - lo) * i / kSweep;
    kl[i] = mog_kl_to_standard(spacing, sig[i], grid);
    if (std::abs(kl[i] - target_kl) < std::abs(kl[best] - target_kl)) best = i;
  }
  MogCalibration out{sig[best], kl[best]};
  // refine inside a neighbouring cell that brackets the target
  for (std::size_t j : {best, best == 0 ? best : best - 1}) {
    if (j + 1 > static_cast<std::size_t>(kSweep)) continue;
    double a = sig[j], b = sig[j + 1], fa = kl[j] - target_kl, fb = kl[j + 1] - target_kl;
    if (fa * fb > 0.0) continue;
    for (int k = 0; k < 50 && b - a > 1e-9; ++k) {
      const double m = 0.5 * (a + b);
      const double fm = mog_kl_to_standard(spacing, m, grid) - target_kl;
      if (fa * fm <= 0.0) {
        b = m;
        fb = fm;
      } else {
        a = m;
        fa = fm;
      }
    }
    const double s = 0.5 * (a + b);
    out = {s, mog_kl_to_standard(spacing, s, grid)};
    break;
  }
  return out;
}

ToyResult fit_to_target(const ToyConfig& cfg, std::uint64_t seed) { return run_toy(cfg, seed); }

ToyResult fit_joint_realnvp(const ToyConfig& cfg, std::uint64_t seed) {
  LARS_REQUIRE(cfg.proposal == ToyProposal::kRealNvp, "fit_joint_realnvp needs a RealNVP proposal");
  return run_toy(cfg, seed);
}

void write_toy_report_csv(const std::filesystem::path& path, const ToyReport& r) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "kl_q_pi,kl_q_p,Z_quad,Z_ema,sigma_mog\n" << std::setprecision(10);
  out << r.kl_q_pi << ',' << r.kl_q_p << ',' << r.z_quad << ',' << r.z_ema << ',' << r.sigma_mog << '\n';
}

}  // namespace lars
