// lars: command-line driver. Every subcommand reads the flat config
// (--config file, then --set key=value overrides) and writes its artifacts
// into out.dir next to config.txt and run.json.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lars/csv.hpp"
#include "lars/errors.hpp"
#include "lars/experiment.hpp"
#include "lars/output_resampling.hpp"
#include "lars/toy.hpp"
#include "lars/vae.hpp"
#include "lars/z_estimator.hpp"

namespace {

using namespace lars;

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string checkpoint;
};

ExperimentConfig load_config(const Common& c) {
  ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig() : ExperimentConfig::load(c.config_path);
  for (const auto& o : c.overrides) cfg.apply_override(o);
  return cfg;
}

std::unique_ptr<VaeModel> require_checkpoint(const Common& c) {
  if (c.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  return load_model(c.checkpoint);
}

Matrix heldout(const ExperimentConfig& cfg, const Dataset& d) {
  const Matrix& x = d.test.rows > 0 ? d.test : d.valid;
  if (x.rows == 0) throw ConfigError("no held-out split (data.test and data.valid are 0)");
  return binarize_fixed(x, d.binarization, Rng(cfg.get_u64("train.seed")).substream("heldout").seed());
}

std::uint64_t eval_seed(const ExperimentConfig& cfg) { return Rng(cfg.get_u64("train.seed")).substream("eval").seed(); }

void log_progress(const VaeModel&, const MetricRow& r) {
  std::fprintf(stderr, "iter %zu elbo %.3f recon %.3f kl %.3f Z_ema %.4g beta %.3f\n", r.iter, r.elbo, r.recon, r.kl,
               r.z_ema, r.beta);
}

int run_toy2d(const Common& c) {
  const auto cfg = load_config(c);
  const auto dir = prepare_run_dir(cfg, "toy2d");
  const ToyConfig tc = toy_config(cfg);
  const std::uint64_t seed = cfg.get_u64("train.seed");
  const ToyResult r = tc.proposal == ToyProposal::kRealNvp ? fit_joint_realnvp(tc, seed) : fit_to_target(tc, seed);
  write_toy_report_csv(dir / "report.csv", r.report);
  write_grid_csv(dir / "densities.csv", r.grids);
  std::printf("kl_q_pi %.4f kl_q_p %.4f Z_quad %.4g Z_ema %.4g sigma %.4f (%.0f s)\n", r.report.kl_q_pi,
              r.report.kl_q_p, r.report.z_quad, r.report.z_ema, r.report.sigma_mog, r.report.seconds);
  return 0;
}

int run_vae_train(const Common& c) {
  const auto cfg = load_config(c);
  const auto dir = prepare_run_dir(cfg, "vae-train");
  const Dataset data = load_dataset(dataset_spec(cfg));
  const TrainConfig tc = train_config(cfg);
  VaeModel model(vae_config(cfg));
  model.init(tc.seed);
  model.z_state.epsilon = cfg.get_double("z.epsilon");
  model.z_state.train_S = cfg.get_size("z.train_S");
  model.z_state.antithetic = cfg.get_bool("z.antithetic");
  TrainResult result;
  try {
    result = train(model, tc, data.train, data.binarization, log_progress);
  } catch (const TrainingDiverged&) {
    save_model(model, dir / "model.bin", cfg.hash());
    throw;
  }
  write_metric_csv(dir / "metrics.csv", result.log);
  save_model(model, dir / "model.bin", cfg.hash());
  const EvalRow row = evaluate(model, heldout(cfg, data), cfg.get_size("train.iwae_K"), eval_seed(cfg), "test");
  write_eval_csv(dir / "eval.csv", {row});
  std::printf("test nll %.3f elbo %.3f recon %.3f kl %.3f Z_eval %.4g (%.0f s)\n", row.nll_iwae, row.elbo, row.recon,
              row.kl, row.z_eval, result.seconds);
  return 0;
}

int run_vae_eval(const Common& c) {
  const auto cfg = load_config(c);
  const auto dir = prepare_run_dir(cfg, "vae-eval");
  const auto model = require_checkpoint(c);
  const Dataset data = load_dataset(dataset_spec(cfg));
  const EvalRow row = evaluate(*model, heldout(cfg, data), cfg.get_size("train.iwae_K"), eval_seed(cfg), "test");
  write_eval_csv(dir / "eval.csv", {row});
  std::printf("test nll %.3f elbo %.3f recon %.3f kl %.3f Z_eval %.4g\n", row.nll_iwae, row.elbo, row.recon, row.kl,
              row.z_eval);
  return 0;
}

int run_posthoc(const Common& c) {
  const auto cfg = load_config(c);
  const auto dir = prepare_run_dir(cfg, "posthoc");
  const auto pretrained = require_checkpoint(c);
  if (pretrained->config().resampled()) throw ConfigError("posthoc expects a checkpoint with a plain prior");
  VaeConfig vc = pretrained->config();
  vc.prior = vc.flow() ? PriorKind::kLarsRealNvp : PriorKind::kLars;
  vc.acceptance_hidden = cfg.get_sizes("lars.hidden");
  vc.truncation = Truncation::parse(cfg.get("lars.T"));
  VaeModel target(vc);
  target.init(pretrained->seed);
  target.z_state.epsilon = cfg.get_double("z.epsilon");
  target.z_state.train_S = cfg.get_size("z.train_S");
  const Dataset data = load_dataset(dataset_spec(cfg));
  const PosthocReport rep = posthoc_fit(*pretrained, target, train_config(cfg), data.train, data.binarization,
                                        heldout(cfg, data), cfg.get_size("train.iwae_K"), eval_seed(cfg));
  write_eval_csv(dir / "posthoc.csv", {rep.before, rep.after});
  write_metric_csv(dir / "metrics.csv", rep.training.log);
  save_model(target, dir / "model.bin", cfg.hash());
  std::printf("before elbo %.3f kl %.3f | after elbo %.3f kl %.3f recon %.3f Z_eval %.4g\n", rep.before.elbo,
              rep.before.kl, rep.after.elbo, rep.after.kl, rep.after.recon, rep.after.z_eval);
  return 0;
}

int run_rank(const Common& c) {
  const auto cfg = load_config(c);
  const auto dir = prepare_run_dir(cfg, "rank");
  const auto model = require_checkpoint(c);
  Rng rng = Rng(cfg.get_u64("train.seed")).substream("rank");
  const auto ranked = rank_samples(*model, cfg.get_size("train.samples"), rng);
  write_rank_csv(dir / "rank.csv", ranked);
  // decoded means of the 25 highest and 25 lowest ranked draws
  std::vector<std::string> header = {"index", "a"};
  for (std::size_t j = 0; j < model->config().data_dim; ++j) header.push_back("p" + std::to_string(j));
  CsvWriter w(dir / "rank_decoded.csv", header);
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (i >= 25 && i + 25 < ranked.size()) continue;
    w.cell(i).cell(ranked[i].a);
    for (double p : ranked[i].decoded_mean) w.cell(p);
    w.end_row();
  }
  std::printf("max a %.4g min a %.4g over %zu draws\n", ranked.front().a, ranked.back().a, ranked.size());
  return 0;
}

int run_z_trace(const Common& c) {
  const auto cfg = load_config(c);
  const auto dir = prepare_run_dir(cfg, "z-trace");
  const auto model = require_checkpoint(c);
  if (!model->acceptance()) throw ConfigError("z-trace needs a checkpoint with a resampled prior");
  const auto trace = z_trace(model->proposal(), *model->acceptance(), model->params, log_checkpoints(cfg.get_u64("z.eval_S")),
                             Rng(cfg.get_u64("train.seed")).substream("z-trace").seed(), cfg.get_bool("z.antithetic"));
  write_z_trace_csv(dir / "z_trace.csv", trace);
  std::printf("Z(S=%llu) = %.6g\n", static_cast<unsigned long long>(trace.back().S), trace.back().Z);
  return 0;
}

int run_output_resample(const Common& c) {
  const auto cfg = load_config(c);
  const auto dir = prepare_run_dir(cfg, "output-resample");
  const auto model = require_checkpoint(c);
  const Dataset data = load_dataset(dataset_spec(cfg));
  const Matrix x = heldout(cfg, data);
  TrainConfig tc = train_config(cfg);
  tc.warmup = 0;
  tc.eval_S = 0;
  OutputResampler out(model->config().data_dim, output_config(cfg));
  out.init(*model, tc.seed);
  model->params.set_trainable("enc.", false);
  model->params.set_trainable("dec.", false);
  model->params.set_trainable("flow.", false);
  model->params.set_trainable("acc.", false);
  const OutputEval before = evaluate_output_resampled(*model, out, x, eval_seed(cfg));
  Rng out_rng = Rng(tc.seed).substream("out.z");
  const auto result = train(*model, tc, data.train, data.binarization, log_progress,
                            [&](Tape& tape, const Matrix& xb) { return out.training_term(tape, *model, xb, out_rng); });
  out.estimate_Z(*model, cfg.get_size("z.train_S") * 100, Rng(tc.seed).substream("out.eval").seed());
  const OutputEval after = evaluate_output_resampled(*model, out, x, eval_seed(cfg));
  CsvWriter w(dir / "output.csv", {"stage", "elbo", "correction", "bound", "Z_out"});
  w.cell("plain").cell(before.plain.elbo).cell(0.0).cell(before.plain.elbo).cell(1.0);
  w.end_row();
  w.cell("resampled").cell(after.plain.elbo).cell(after.correction).cell(after.bound).cell(out.z_eval);
  w.end_row();
  write_metric_csv(dir / "metrics.csv", result.log);
  std::printf("plain bound %.3f resampled bound %.3f Z_out %.4g\n", before.plain.elbo, after.bound, out.z_eval);
  return 0;
}

int run_rs_oracle(const Common& c) {
  const auto cfg = load_config(c);
  const auto dir = prepare_run_dir(cfg, "rs-oracle");
  const ToyConfig tc = toy_config(cfg);
  const double sigma = tc.mog_sigma > 0.0
                           ? tc.mog_sigma
                           : calibrate_mog(tc.mog_spacing, tc.mog_target_kl, tc.mog_sigma_lo, tc.mog_sigma_hi, tc.grid).sigma;
  const MogTarget q = MogTarget::grid3x3(tc.mog_spacing, sigma);
  const RsEmulationReport r = classical_rs_emulation_check(q, StandardNormal(2), tc.grid);
  CsvWriter w(dir / "rs_oracle.csv", {"sigma_mog", "c", "Z_quad", "kl", "ok"});
  w.cell(sigma).cell(r.c).cell(r.z_quad).cell(r.kl).cell(r.ok ? 1 : 0);
  w.end_row();
  std::printf("c %.6g Z_quad %.6g kl %.3g %s\n", r.c, r.z_quad, r.kl, r.ok ? "ok" : r.failure.c_str());
  return r.ok ? 0 : 1;
}

int report_error(const char* kind, const std::exception& e, int code) {
  nlohmann::json j;
  j["error"] = kind;
  j["message"] = e.what();
  std::cerr << j.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"learned accept/reject sampling experiments"};
  app.require_subcommand(1);
  Common common;
  struct Sub {
    const char* name;
    const char* help;
    int (*fn)(const Common&);
    bool checkpoint;
  };
  const Sub subs[] = {
      {"toy2d", "fit an acceptance (and optionally a flow) to the 2D mixture", run_toy2d, false},
      {"vae-train", "train a VAE", run_vae_train, false},
      {"vae-eval", "evaluate a VAE checkpoint on the held-out split", run_vae_eval, true},
      {"posthoc", "fit a prior acceptance to a frozen plain-prior VAE", run_posthoc, true},
      {"rank", "rank proposal draws by acceptance value", run_rank, true},
      {"z-trace", "running Monte Carlo estimate of Z", run_z_trace, true},
      {"output-resample", "fit an output acceptance to a frozen VAE", run_output_resample, true},
      {"rs-oracle", "classical rejection sampling emulation check", run_rs_oracle, false},
  };
  int (*chosen)(const Common&) = nullptr;
  for (const auto& s : subs) {
    auto* sc = app.add_subcommand(s.name, s.help);
    sc->add_option("-c,--config", common.config_path, "config file (key = value lines)");
    sc->add_option("-s,--set", common.overrides, "override, key=value (repeatable)");
    if (s.checkpoint) sc->add_option("--checkpoint", common.checkpoint, "model.bin from an earlier run")->required();
    sc->callback([&chosen, fn = s.fn] { chosen = fn; });
  }
  CLI11_PARSE(app, argc, argv);
  try {
    return chosen(common);
  } catch (const ConfigError& e) {
    return report_error("config", e, 2);
  } catch (const ParseError& e) {
    return report_error("parse", e, 3);
  } catch (const TrainingDiverged& e) {
    return report_error("diverged", e, 4);
  } catch (const ContractViolation& e) {
    return report_error("contract", e, 5);
  } catch (const std::exception& e) {
    return report_error("runtime", e, 1);
  }
}
