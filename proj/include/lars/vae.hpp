#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lars/acceptance.hpp"
#include "lars/data.hpp"
#include "lars/distributions.hpp"
#include "lars/mlp.hpp"
#include "lars/params.hpp"
#include "lars/resampled.hpp"
#include "lars/z_estimator.hpp"

namespace lars {

enum class PriorKind { kStandard, kRealNvp, kLars, kLarsRealNvp };

PriorKind parse_prior_kind(const std::string& s);
std::string prior_kind_name(PriorKind k);

inline constexpr double kLogStdMin = -7.0;
inline constexpr double kLogStdMax = 2.0;

struct VaeConfig {
  std::size_t data_dim = 784;
  std::size_t d_z = 50;
  std::vector<std::size_t> encoder_hidden = {300, 300};
  std::vector<std::size_t> decoder_hidden = {300, 300};
  PriorKind prior = PriorKind::kStandard;
  std::size_t flow_couplings = 4;
  std::vector<std::size_t> flow_hidden = {100, 100};
  std::vector<std::size_t> acceptance_hidden = {100, 100};
  Truncation truncation = Truncation::after(100);
  // > 0: the LARS acceptance is this constant instead of a network
  double constant_acceptance = 0.0;

  bool resampled() const { return prior == PriorKind::kLars || prior == PriorKind::kLarsRealNvp; }
  bool flow() const { return prior == PriorKind::kRealNvp || prior == PriorKind::kLarsRealNvp; }
};

// Single-stochastic-layer VAE. Parameters are grouped by name prefix:
// "enc." (trunk + mean/log_std heads), "dec.", "flow." (flow prior or
// proposal) and "acc." (prior acceptance).
class VaeModel {
 public:
  explicit VaeModel(VaeConfig cfg);
  VaeModel(const VaeModel&) = delete;
  VaeModel& operator=(const VaeModel&) = delete;

  // Fills params: encoder/decoder Glorot, flow at identity, acceptance
  // Glorot; each group from its own init substream of `seed`.
  void init(std::uint64_t seed);

  const VaeConfig& config() const { return cfg_; }
  const Proposal& proposal() const { return *proposal_; }
  // Prior acceptance; null unless the prior is resampled.
  const Acceptance* acceptance() const { return acceptance_.get(); }
  const AcceptanceNet* acceptance_net() const;
  ResampledDensity prior_density() const;

  struct Posterior {
    Var mean;
    Var log_std;  // clamped to [kLogStdMin, kLogStdMax]
  };
  Posterior encode(Tape& tape, Var x) const;
  Var decode_logits(Tape& tape, Var z) const;
  // log prior density of z using a fixed normalizer Z (ignored for plain priors).
  Var log_prior(Tape& tape, Var z, double Z) const;

  ParamStore params;
  ZEstimatorState z_state;
  // Large-S normalizer estimate used at evaluation time.
  double z_eval = 1.0;
  std::uint64_t s_eval = 0;
  std::uint64_t seed = 0;

 private:
  VaeConfig cfg_;
  Mlp trunk_, mean_head_, log_std_head_, decoder_;
  std::unique_ptr<Proposal> proposal_;
  std::unique_ptr<Acceptance> acceptance_;
};

enum class ZMode {
  kTrain,  // batch_logZ, ema updated
  kEval,   // stored z_eval
};

struct ElboTerms {
  Var recon;  // R x 1, log p(x|z)
  Var kl;     // R x 1, log q(z|x) - log p(z)
  Var log_q;  // R x 1
  Var z;      // R x d_z
  double z_used = 1.0;  // mean Z value in the prior term
  std::size_t capped = 0;
};

// Single-sample reparameterized ELBO terms for a binary batch.
ElboTerms elbo_terms(VaeModel& model, Tape& tape, const Matrix& x, Rng& noise_rng, Rng& z_rng, ZMode mode);

struct TrainConfig {
  std::size_t iterations = 200'000;
  double lr = 3e-4;
  double lr_final = 1e-4;
  std::size_t decay_at = 50'000;
  std::size_t warmup = 10'000;
  std::size_t batch = 128;
  std::size_t log_every = 1000;
  std::uint64_t seed = 1;
  // 0 skips the final large-S normalizer estimate
  std::uint64_t eval_S = 100'000'000;
  std::size_t eval_block = 100'000;
  bool antithetic = false;

  void validate() const;
};

struct MetricRow {
  std::size_t iter = 0;
  double elbo = 0.0;
  double recon = 0.0;
  double kl = 0.0;
  double z_ema = 0.0;
  double beta = 0.0;
};

struct TrainResult {
  std::vector<MetricRow> log;
  double seconds = 0.0;
  std::size_t capped_ratios = 0;
};

// Called after every logged window with the model state at that point.
using TrainHook = std::function<void(const VaeModel&, const MetricRow&)>;
// Extra per-datapoint bound term (R x 1) added to the objective and to the
// logged elbo; used by output resampling.
using ElboExtra = std::function<Var(Tape&, const Matrix& x)>;

// Maximizes mean(recon - beta * kl) with Adam. Batches are drawn with
// replacement and binarized per draw. Non-finite loss restores the last
// logged parameters and throws TrainingDiverged. Ends with the large-S
// normalizer estimate for resampled priors.
TrainResult train(VaeModel& model, const TrainConfig& cfg, const Matrix& images, Binarization mode,
                  const TrainHook& hook = {}, const ElboExtra& extra = {});

// Large-S estimate of Z into model.z_eval / model.s_eval.
void estimate_eval_Z(VaeModel& model, std::uint64_t S, std::uint64_t seed, std::size_t block, bool antithetic);

// -log (1/K) sum_k p(x|z_k) p(z_k) / q(z_k|x), z_k ~ q(.|x).
double iwae_nll(const VaeModel& model, std::span<const double> x, std::size_t K, Rng& rng);

struct EvalRow {
  std::string split;
  double nll_iwae = 0.0;
  double nll_se = 0.0;
  double elbo = 0.0;
  double recon = 0.0;
  double kl = 0.0;
  double z_eval = 1.0;
  std::uint64_t s_eval = 0;
  std::string T;
  std::vector<double> per_point_nll;
  std::vector<double> per_point_recon;
  std::vector<double> per_point_kl;
};

// ELBO terms (one sample per point, stored Z) and IWAE over binary data;
// point i uses rng stream shard(i) of `seed`, so results do not depend on
// the thread count. K = 0 skips IWAE.
EvalRow evaluate(const VaeModel& model, const Matrix& x, std::size_t K, std::uint64_t seed, const std::string& split);
void write_eval_csv(const std::filesystem::path& path, const std::vector<EvalRow>& rows);
void write_metric_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows);

struct PosthocReport {
  EvalRow before;
  EvalRow after;
  TrainResult training;
};

// Copies a trained plain-prior model's encoder, decoder (and flow) into
// `target` (whose prior must be resampled), freezes them and fits only the
// acceptance on the same ELBO. The acceptance starts constant (zero output
// weights) so the initial ELBO equals the plain model's. Both evaluations
// use `eval_seed`.
PosthocReport posthoc_fit(const VaeModel& pretrained, VaeModel& target, const TrainConfig& cfg, const Matrix& images,
                          Binarization mode, const Matrix& heldout_binary, std::size_t K, std::uint64_t eval_seed);

struct RankedSample {
  std::size_t draw = 0;  // 1-based position among the proposal draws
  double a = 0.0;
  std::vector<double> z;
  std::vector<double> decoded_mean;
};

// S proposal draws sorted by descending acceptance value.
std::vector<RankedSample> rank_samples(const VaeModel& model, std::size_t S, Rng& rng, bool decode = true);
void write_rank_csv(const std::filesystem::path& path, const std::vector<RankedSample>& ranked);

// Checkpoint (binary params) plus a JSON sidecar with the model config,
// T, Z_eval, S_eval, seed and config hash.
void save_model(const VaeModel& model, const std::filesystem::path& checkpoint, const std::string& config_hash);
std::unique_ptr<VaeModel> load_model(const std::filesystem::path& checkpoint);

}  // namespace lars
