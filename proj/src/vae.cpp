#include "lars/vae.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "lars/adam.hpp"
#include "lars/csv.hpp"
#include "lars/errors.hpp"
#include "lars/realnvp.hpp"

namespace lars {

PriorKind parse_prior_kind(const std::string& s) {
  if (s == "standard") return PriorKind::kStandard;
  if (s == "realnvp") return PriorKind::kRealNvp;
  if (s == "lars") return PriorKind::kLars;
  if (s == "lars-realnvp") return PriorKind::kLarsRealNvp;
  throw ConfigError("unknown prior kind '" + s + "' (standard|realnvp|lars|lars-realnvp)");
}

std::string prior_kind_name(PriorKind k) {
  switch (k) {
    case PriorKind::kStandard: return "standard";
    case PriorKind::kRealNvp: return "realnvp";
    case PriorKind::kLars: return "lars";
    case PriorKind::kLarsRealNvp: return "lars-realnvp";
  }
  return "?";
}

VaeModel::VaeModel(VaeConfig cfg) : cfg_(std::move(cfg)) {
  LARS_REQUIRE(!cfg_.encoder_hidden.empty(), "encoder needs at least one hidden layer");
  LARS_REQUIRE(cfg_.d_z >= 1, "d_z must be positive");
  std::vector<std::size_t> trunk_hidden(cfg_.encoder_hidden.begin(), cfg_.encoder_hidden.end() - 1);
  const std::size_t width = cfg_.encoder_hidden.back();
  trunk_ = Mlp(MlpSpec{cfg_.data_dim, trunk_hidden, width}, "enc.trunk");
  mean_head_ = Mlp(MlpSpec{width, {}, cfg_.d_z}, "enc.mean");
  log_std_head_ = Mlp(MlpSpec{width, {}, cfg_.d_z}, "enc.log_std");
  decoder_ = Mlp(MlpSpec{cfg_.d_z, cfg_.decoder_hidden, cfg_.data_dim}, "dec");
  if (cfg_.flow())
    proposal_ = std::make_unique<RealNvpFlow>(RealNvpSpec{cfg_.d_z, cfg_.flow_couplings, cfg_.flow_hidden}, "flow");
  else
    proposal_ = std::make_unique<StandardNormal>(cfg_.d_z);
  if (cfg_.resampled()) {
    if (cfg_.constant_acceptance > 0.0)
      acceptance_ = std::make_unique<ConstantAcceptance>(cfg_.d_z, cfg_.constant_acceptance);
    else
      acceptance_ = std::make_unique<AcceptanceNet>(cfg_.d_z, cfg_.acceptance_hidden, "acc");
  }
}

void VaeModel::init(std::uint64_t root_seed) {
  seed = root_seed;
  params = ParamStore();
  const Rng root(root_seed);
  Rng enc = root.substream("init.enc");
  trunk_.init(params, enc);
  mean_head_.init(params, enc);
  log_std_head_.init(params, enc);
  Rng dec = root.substream("init.dec");
  decoder_.init(params, dec);
  Rng flow = root.substream("init.flow");
  proposal_->init(params, flow);
  if (acceptance_) {
    Rng acc = root.substream("init.acc");
    acceptance_->init(params, acc);
  }
  z_state.ema = 0.5;
  z_state.capped_ratios = 0;
  z_eval = 1.0;
  s_eval = 0;
}

const AcceptanceNet* VaeModel::acceptance_net() const { return dynamic_cast<const AcceptanceNet*>(acceptance_.get()); }

ResampledDensity VaeModel::prior_density() const {
  LARS_REQUIRE(acceptance_ != nullptr, "model prior is not resampled");
  return ResampledDensity(*proposal_, *acceptance_, cfg_.truncation);
}

VaeModel::Posterior VaeModel::encode(Tape& tape, Var x) const {
  const Var h = tanh(trunk_.preactivation(tape, x));
  return {mean_head_.preactivation(tape, h), clamp(log_std_head_.preactivation(tape, h), kLogStdMin, kLogStdMax)};
}

Var VaeModel::decode_logits(Tape& tape, Var z) const { return decoder_.preactivation(tape, z); }

Var VaeModel::log_prior(Tape& tape, Var z, double Z) const {
  if (!acceptance_) return proposal_->log_prob(tape, z);
  return prior_density().log_prob(tape, z, tape.constant(Z));
}

ElboTerms elbo_terms(VaeModel& model, Tape& tape, const Matrix& x, Rng& noise_rng, Rng& z_rng, ZMode mode) {
  LARS_REQUIRE(x.cols == model.config().data_dim, "elbo_terms: data width mismatch");
  LARS_REQUIRE(is_binary(x), "elbo_terms: observations must be binary");
  ElboTerms t;
  const Var xv = tape.constant(x);
  const auto post = model.encode(tape, xv);
  t.z = diag_gaussian_sample(post.mean, post.log_std, noise_rng);
  t.log_q = diag_gaussian_log_prob(t.z, post.mean, post.log_std);
  t.recon = bernoulli_log_prob(model.decode_logits(tape, t.z), x);
  Var log_p;
  if (model.acceptance() && mode == ZMode::kTrain) {
    const ResampledDensity rd = model.prior_density();
    const BatchLogZ bz = batch_logZ(tape, rd, model.z_state, t.z, t.log_q, z_rng);
    log_p = rd.log_prob(tape, t.z, bz.z_r);
    t.z_used = bz.new_ema;
    t.capped = bz.capped;
  } else {
    log_p = model.log_prior(tape, t.z, model.z_eval);
    t.z_used = model.acceptance() ? model.z_eval : 1.0;
  }
  t.kl = t.log_q - log_p;
  return t;
}

void TrainConfig::validate() const {
  LARS_REQUIRE(warmup <= iterations || iterations == 0, "warmup must not exceed iterations");
  LARS_REQUIRE(batch >= 1 && log_every >= 1, "batch and log_every must be positive");
  LARS_REQUIRE(lr > 0.0 && lr_final > 0.0, "learning rates must be positive");
}

namespace {

double mean_of(const Var& v) {
  const auto& d = v.value().data;
  return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
}

void check_frozen_grads(const ParamStore& store) {
  for (const auto& e : store.entries()) {
    if (e.trainable) continue;
    for (double g : e.grads)
      if (g != 0.0) throw ContractViolation("gradient reached frozen parameter " + e.name);
  }
}

}  // namespace

TrainResult train(VaeModel& model, const TrainConfig& cfg, const Matrix& images, Binarization mode,
                  const TrainHook& hook, const ElboExtra& extra) {
  cfg.validate();
  LARS_REQUIRE(images.rows > 0, "train: no training images");
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult result;
  const Rng root(cfg.seed);
  Rng data_rng = root.substream("data");
  Rng noise_rng = root.substream("train");
  Rng z_rng = root.substream("z");
  Adam adam(model.params, AdamConfig{cfg.lr});

  ParamStore last_good = model.params;
  double s_elbo = 0.0, s_recon = 0.0, s_kl = 0.0;
  std::size_t in_window = 0;
  Matrix batch(cfg.batch, images.cols);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    for (std::size_t r = 0; r < cfg.batch; ++r) {
      const auto src = images.row_span(data_rng.index(images.rows));
      std::copy(src.begin(), src.end(), batch.row_span(r).begin());
    }
    const Matrix x = binarize(batch, mode, data_rng);
    const double beta = cfg.warmup == 0 ? 1.0 : std::min(1.0, static_cast<double>(it) / static_cast<double>(cfg.warmup));
    adam.set_lr(it < cfg.decay_at ? cfg.lr : cfg.lr_final);

    model.params.zero_grads();
    Tape tape(model.params);
    const ElboTerms t = elbo_terms(model, tape, x, noise_rng, z_rng, ZMode::kTrain);
    Var per_point = t.recon - scale(t.kl, beta);
    double extra_mean = 0.0;
    if (extra) {
      const Var e = extra(tape, x);
      per_point = per_point + e;
      extra_mean = mean_of(e);
    }
    const Var loss = neg(mean(per_point));
    const double recon = mean_of(t.recon), kl = mean_of(t.kl);
    if (!std::isfinite(loss.scalar()) || !std::isfinite(recon) || !std::isfinite(kl)) {
      model.params = last_good;
      throw TrainingDiverged("non-finite VAE loss", it);
    }
    tape.backward(loss);
    check_frozen_grads(model.params);
    adam.step(model.params);
    result.capped_ratios += t.capped;

    s_elbo += recon - kl + extra_mean;
    s_recon += recon;
    s_kl += kl;
    ++in_window;
    if ((it + 1) % cfg.log_every == 0 || it + 1 == cfg.iterations) {
      const double n = static_cast<double>(in_window);
      MetricRow row{it + 1, s_elbo / n, s_recon / n, s_kl / n, model.acceptance() ? model.z_state.ema : 1.0, beta};
      result.log.push_back(row);
      s_elbo = s_recon = s_kl = 0.0;
      in_window = 0;
      last_good = model.params;
      if (hook) hook(model, row);
    }
  }
  if (model.acceptance() && cfg.eval_S > 0)
    estimate_eval_Z(model, cfg.eval_S, root.substream("eval.z").seed(), cfg.eval_block, cfg.antithetic);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

void estimate_eval_Z(VaeModel& model, std::uint64_t S, std::uint64_t seed, std::size_t block, bool antithetic) {
  LARS_REQUIRE(model.acceptance() != nullptr, "estimate_eval_Z: prior is not resampled");
  McOptions opts;
  opts.block = block;
  opts.antithetic = antithetic;
  model.z_eval = mc_estimate_Z(model.proposal(), *model.acceptance(), model.params, S, seed, opts);
  model.s_eval = S;
}

namespace {

// Log importance weights log p(x|z) + log p(z) - log q(z|x) for n draws.
std::vector<double> log_weights(const VaeModel& model, const Matrix& x_row, const Matrix& mean,
                                const Matrix& log_std, std::size_t n, Rng& rng) {
  Tape tape(model.params);
  const Var m = tape.constant(mean);
  const Var s = tape.constant(log_std);
  const Var z = diag_gaussian_sample(m, s, rng);
  const Var log_q = diag_gaussian_log_prob(z, m, s);
  Matrix xs(n, x_row.cols);
  for (std::size_t r = 0; r < n; ++r) std::copy(x_row.data.begin(), x_row.data.end(), xs.row_span(r).begin());
  const Var recon = bernoulli_log_prob(model.decode_logits(tape, z), xs);
  const Var lw = recon + model.log_prior(tape, z, model.z_eval) - log_q;
  return lw.value().data;
}

Matrix repeat_row(const Matrix& row, std::size_t n) {
  Matrix out(n, row.cols);
  for (std::size_t r = 0; r < n; ++r) std::copy(row.data.begin(), row.data.end(), out.row_span(r).begin());
  return out;
}

double iwae_from_posterior(const VaeModel& model, const Matrix& x_row, const Matrix& mean, const Matrix& log_std,
                           std::size_t K, Rng& rng) {
  constexpr std::size_t kChunk = 500;
  std::vector<double> lw;
  lw.reserve(K);
  for (std::size_t done = 0; done < K;) {
    const std::size_t m = std::min(kChunk, K - done);
    const auto w = log_weights(model, x_row, repeat_row(mean, m), repeat_row(log_std, m), m, rng);
    lw.insert(lw.end(), w.begin(), w.end());
    done += m;
  }
  const double mx = *std::max_element(lw.begin(), lw.end());
  if (!std::isfinite(mx)) return -mx;
  double s = 0.0;
  for (double v : lw) s += std::exp(v - mx);
  return -(mx + std::log(s) - std::log(static_cast<double>(K)));
}

}  // namespace

double iwae_nll(const VaeModel& model, std::span<const double> x, std::size_t K, Rng& rng) {
  LARS_REQUIRE(K >= 1, "iwae_nll: K must be >= 1");
  const Matrix x_row(1, x.size(), std::vector<double>(x.begin(), x.end()));
  LARS_REQUIRE(is_binary(x_row), "iwae_nll: observation must be binary");
  Tape tape(model.params);
  const auto post = model.encode(tape, tape.constant(x_row));
  return iwae_from_posterior(model, x_row, post.mean.value(), post.log_std.value(), K, rng);
}

EvalRow evaluate(const VaeModel& model, const Matrix& x, std::size_t K, std::uint64_t seed, const std::string& split) {
  LARS_REQUIRE(is_binary(x), "evaluate: observations must be binary");
  EvalRow row;
  row.split = split;
  row.z_eval = model.acceptance() ? model.z_eval : 1.0;
  row.s_eval = model.s_eval;
  row.T = model.acceptance() ? model.config().truncation.str() : "1";
  const std::size_t n = x.rows;
  row.per_point_nll.assign(n, 0.0);
  row.per_point_recon.assign(n, 0.0);
  row.per_point_kl.assign(n, 0.0);
  const Rng root(seed);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = root.shard(i);
    const Matrix x_row = x.slice_rows(i, 1);
    Tape tape(model.params);
    const auto post = model.encode(tape, tape.constant(x_row));
    const Var z = diag_gaussian_sample(post.mean, post.log_std, rng);
    const Var log_q = diag_gaussian_log_prob(z, post.mean, post.log_std);
    const Var recon = bernoulli_log_prob(model.decode_logits(tape, z), x_row);
    const Var log_p = model.log_prior(tape, z, model.z_eval);
    row.per_point_recon[i] = recon.scalar();
    row.per_point_kl[i] = (log_q - log_p).scalar();
    if (K > 0) row.per_point_nll[i] = iwae_from_posterior(model, x_row, post.mean.value(), post.log_std.value(), K, rng);
  }
  const double dn = static_cast<double>(n);
  row.recon = std::accumulate(row.per_point_recon.begin(), row.per_point_recon.end(), 0.0) / dn;
  row.kl = std::accumulate(row.per_point_kl.begin(), row.per_point_kl.end(), 0.0) / dn;
  row.elbo = row.recon - row.kl;
  if (K > 0) {
    row.nll_iwae = std::accumulate(row.per_point_nll.begin(), row.per_point_nll.end(), 0.0) / dn;
    double ss = 0.0;
    for (double v : row.per_point_nll) ss += (v - row.nll_iwae) * (v - row.nll_iwae);
    row.nll_se = n > 1 ? std::sqrt(ss / (dn - 1.0) / dn) : 0.0;
  } else {
    row.nll_iwae = std::numeric_limits<double>::quiet_NaN();
  }
  return row;
}

void write_eval_csv(const std::filesystem::path& path, const std::vector<EvalRow>& rows) {
  CsvWriter w(path, {"split", "nll_iwae", "elbo", "recon", "kl", "Z_eval", "S_eval", "T"});
  for (const auto& r : rows) {
    w.cell(r.split).cell(r.nll_iwae).cell(r.elbo).cell(r.recon).cell(r.kl).cell(r.z_eval).cell(
        static_cast<unsigned long long>(r.s_eval)).cell(r.T);
    w.end_row();
  }
}

void write_metric_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows) {
  CsvWriter w(path, {"iter", "elbo", "recon", "kl", "Z_ema", "beta"});
  for (const auto& r : rows) {
    w.cell(r.iter).cell(r.elbo).cell(r.recon).cell(r.kl).cell(r.z_ema).cell(r.beta);
    w.end_row();
  }
}

PosthocReport posthoc_fit(const VaeModel& pretrained, VaeModel& target, const TrainConfig& cfg, const Matrix& images,
                          Binarization mode, const Matrix& heldout_binary, std::size_t K, std::uint64_t eval_seed) {
  const auto* net = target.acceptance_net();
  LARS_REQUIRE(net != nullptr, "posthoc_fit: target needs a learned acceptance");
  LARS_REQUIRE(pretrained.config().d_z == target.config().d_z && pretrained.config().flow() == target.config().flow(),
               "posthoc_fit: pretrained model and target differ in latent space or proposal");
  if (!target.params.contains(net->net().weight_name(0))) target.init(pretrained.seed);
  for (const auto& e : pretrained.params.entries()) {
    if (!(e.name.starts_with("enc.") || e.name.starts_with("dec.") || e.name.starts_with("flow."))) continue;
    auto& dst = target.params.at(e.name);
    LARS_REQUIRE(dst.shape == e.shape, "posthoc_fit: shape mismatch for " + e.name);
    dst.values = e.values;
  }
  // constant start: a = logistic(0) everywhere
  auto& w_last = target.params.at(net->net().weight_name(net->net().spec().layer_count() - 1));
  std::fill(w_last.values.begin(), w_last.values.end(), 0.0);
  auto& b_last = target.params.at(net->net().bias_name(net->net().spec().layer_count() - 1));
  std::fill(b_last.values.begin(), b_last.values.end(), 0.0);
  target.params.set_trainable("enc.", false);
  target.params.set_trainable("dec.", false);
  target.params.set_trainable("flow.", false);
  target.z_state.ema = 0.5;

  PosthocReport rep;
  const Rng root(cfg.seed);
  estimate_eval_Z(target, std::max<std::uint64_t>(cfg.eval_S, 2), root.substream("posthoc.z0").seed(), cfg.eval_block,
                  false);
  rep.before = evaluate(target, heldout_binary, K, eval_seed, "before");
  TrainConfig tc = cfg;
  tc.warmup = 0;
  rep.training = train(target, tc, images, mode);
  rep.after = evaluate(target, heldout_binary, K, eval_seed, "after");
  return rep;
}

std::vector<RankedSample> rank_samples(const VaeModel& model, std::size_t S, Rng& rng, bool decode) {
  LARS_REQUIRE(S >= 1, "rank_samples: S must be >= 1");
  const BoundProposal pi(model.proposal(), model.params);
  const Matrix z = pi.sample(S, rng);
  std::vector<double> a(S, 1.0);
  if (model.acceptance()) a = acceptance_values(*model.acceptance(), model.params, z);
  Matrix means;
  if (decode) {
    Tape tape(model.params);
    means = logistic(model.decode_logits(tape, tape.constant(z))).value();
  }
  std::vector<RankedSample> out(S);
  for (std::size_t i = 0; i < S; ++i) {
    out[i].draw = i + 1;
    out[i].a = a[i];
    const auto zr = z.row_span(i);
    out[i].z.assign(zr.begin(), zr.end());
    if (decode) {
      const auto mr = means.row_span(i);
      out[i].decoded_mean.assign(mr.begin(), mr.end());
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const RankedSample& l, const RankedSample& r) { return l.a > r.a; });
  return out;
}

void write_rank_csv(const std::filesystem::path& path, const std::vector<RankedSample>& ranked) {
  std::vector<std::string> header = {"index", "a", "steps"};
  const std::size_t d = ranked.empty() ? 0 : ranked.front().z.size();
  for (std::size_t j = 0; j < d; ++j) header.push_back("z" + std::to_string(j));
  CsvWriter w(path, header);
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    w.cell(i).cell(ranked[i].a).cell(ranked[i].draw);
    for (double v : ranked[i].z) w.cell(v);
    w.end_row();
  }
}

namespace {

std::filesystem::path sidecar(const std::filesystem::path& checkpoint) {
  auto p = checkpoint;
  p += ".json";
  return p;
}

}  // namespace

void save_model(const VaeModel& model, const std::filesystem::path& checkpoint, const std::string& config_hash) {
  save_checkpoint(model.params, checkpoint);
  const auto& c = model.config();
  nlohmann::json j;
  j["model"] = {{"data_dim", c.data_dim},
                {"d_z", c.d_z},
                {"encoder_hidden", c.encoder_hidden},
                {"decoder_hidden", c.decoder_hidden},
                {"prior", prior_kind_name(c.prior)},
                {"flow_couplings", c.flow_couplings},
                {"flow_hidden", c.flow_hidden},
                {"acceptance_hidden", c.acceptance_hidden},
                {"constant_acceptance", c.constant_acceptance}};
  j["T"] = c.truncation.str();
  j["Z_eval"] = model.z_eval;
  j["S_eval"] = model.s_eval;
  j["Z_ema"] = model.z_state.ema;
  j["seed"] = model.seed;
  j["config_hash"] = config_hash;
  std::ofstream out(sidecar(checkpoint));
  if (!out) throw std::runtime_error("cannot write " + sidecar(checkpoint).string());
  out << j.dump(2) << '\n';
}

std::unique_ptr<VaeModel> load_model(const std::filesystem::path& checkpoint) {
  std::ifstream in(sidecar(checkpoint));
  if (!in) throw std::runtime_error("missing checkpoint metadata " + sidecar(checkpoint).string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad checkpoint metadata: ") + e.what(), 0);
  }
  VaeConfig c;
  try {
    const auto& m = j.at("model");
    c.data_dim = m.at("data_dim");
    c.d_z = m.at("d_z");
    c.encoder_hidden = m.at("encoder_hidden").get<std::vector<std::size_t>>();
    c.decoder_hidden = m.at("decoder_hidden").get<std::vector<std::size_t>>();
    c.prior = parse_prior_kind(m.at("prior"));
    c.flow_couplings = m.at("flow_couplings");
    c.flow_hidden = m.at("flow_hidden").get<std::vector<std::size_t>>();
    c.acceptance_hidden = m.at("acceptance_hidden").get<std::vector<std::size_t>>();
    c.constant_acceptance = m.at("constant_acceptance");
    c.truncation = Truncation::parse(j.at("T").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad checkpoint metadata: ") + e.what(), 0);
  }
  auto model = std::make_unique<VaeModel>(c);
  model->init(j.value("seed", std::uint64_t{0}));
  ParamStore loaded = load_checkpoint(checkpoint);
  if (loaded.size() != model->params.size()) throw ParseError("checkpoint does not match model layout", 0);
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    const auto& a = loaded.at(i);
    const auto& b = model->params.at(i);
    if (a.name != b.name || a.shape != b.shape) throw ParseError("checkpoint entry mismatch at " + a.name, 0);
  }
  model->params = std::move(loaded);
  model->z_eval = j.value("Z_eval", 1.0);
  model->s_eval = j.value("S_eval", std::uint64_t{0});
  model->z_state.ema = j.value("Z_ema", 0.5);
  return model;
}

}  // namespace lars
