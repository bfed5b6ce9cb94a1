#include "lars/experiment.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "lars/errors.hpp"

namespace lars {

namespace {

Binarization binarization_of(const std::string& s) {
  if (s == "dynamic") return Binarization::kDynamic;
  if (s == "static") return Binarization::kStatic;
  throw ConfigError("data.binarization must be dynamic or static, got '" + s + "'");
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

DatasetSpec dataset_spec(const ExperimentConfig& cfg) {
  DatasetSpec d;
  const std::string& src = cfg.get("data.source");
  if (src == "idx")
    d.source = DataSource::kIdx;
  else if (src == "text")
    d.source = DataSource::kBinarizedText;
  else
    throw ConfigError("data.source must be idx or text, got '" + src + "'");
  d.images = cfg.get("data.images");
  d.labels = cfg.get("data.labels");
  d.text = cfg.get("data.text");
  d.binarization = binarization_of(cfg.get("data.binarization"));
  if (d.source == DataSource::kIdx && d.binarization == Binarization::kStatic)
    throw ConfigError("idx data is grayscale; use data.binarization = dynamic");
  if (d.source == DataSource::kBinarizedText && d.binarization == Binarization::kDynamic)
    throw ConfigError("text data is pre-binarized; use data.binarization = static");
  d.subset = cfg.get_size("data.subset");
  d.train = cfg.get_size("data.train");
  d.valid = cfg.get_size("data.valid");
  d.test = cfg.get_size("data.test");
  return d;
}

VaeConfig vae_config(const ExperimentConfig& cfg) {
  VaeConfig v;
  v.d_z = cfg.get_size("model.d_z");
  v.encoder_hidden = cfg.get_sizes("model.encoder");
  v.decoder_hidden = cfg.get_sizes("model.decoder");
  v.prior = parse_prior_kind(cfg.get("model.prior"));
  v.flow_couplings = cfg.get_size("model.flow_couplings");
  v.flow_hidden = cfg.get_sizes("model.flow_hidden");
  v.acceptance_hidden = cfg.get_sizes("lars.hidden");
  v.truncation = Truncation::parse(cfg.get("lars.T"));
  return v;
}

TrainConfig train_config(const ExperimentConfig& cfg) {
  TrainConfig t;
  t.iterations = cfg.get_size("train.iters");
  t.lr = cfg.get_double("train.lr");
  t.lr_final = cfg.get_double("train.lr_final");
  t.decay_at = cfg.get_size("train.decay_at");
  t.warmup = cfg.get_size("train.warmup");
  t.batch = cfg.get_size("train.batch");
  t.log_every = cfg.get_size("train.log_every");
  t.seed = cfg.get_u64("train.seed");
  t.eval_S = cfg.get_u64("z.eval_S");
  t.eval_block = cfg.get_size("z.block");
  t.antithetic = cfg.get_bool("z.antithetic");
  t.validate();
  return t;
}

ToyConfig toy_config(const ExperimentConfig& cfg) {
  ToyConfig t;
  t.mog_spacing = cfg.get_double("toy.spacing");
  t.mog_target_kl = cfg.get_double("toy.target_kl");
  t.mog_sigma = cfg.get_double("toy.sigma");
  t.mog_sigma_lo = cfg.get_double("toy.sigma_lo");
  t.mog_sigma_hi = cfg.get_double("toy.sigma_hi");
  const std::string& p = cfg.get("toy.proposal");
  if (p == "normal")
    t.proposal = ToyProposal::kStandardNormal;
  else if (p == "realnvp")
    t.proposal = ToyProposal::kRealNvp;
  else
    throw ConfigError("toy.proposal must be normal or realnvp, got '" + p + "'");
  t.acceptance_hidden = cfg.get_sizes("toy.hidden");
  t.train_acceptance = cfg.get_bool("toy.train_acceptance");
  t.flow_couplings = cfg.get_size("toy.flow_couplings");
  t.flow_hidden = cfg.get_sizes("toy.flow_hidden");
  t.iterations = cfg.get_size("toy.iters");
  t.lr = cfg.get_double("toy.lr");
  t.batch = cfg.get_size("toy.batch");
  t.train_S = cfg.get_size("toy.train_S");
  t.epsilon = cfg.get_double("z.epsilon");
  t.truncation = Truncation::parse(cfg.get("toy.T"));
  t.grid = GridSpec{cfg.get_double("toy.grid.min"), cfg.get_double("toy.grid.max"), cfg.get_size("toy.grid.n")};
  t.grid.validate();
  t.grid_check = cfg.get_bool("toy.grid.check");
  t.export_grid = GridSpec{t.grid.min, t.grid.max, cfg.get_size("toy.export_n")};
  t.export_grid.validate();
  return t;
}

OutputResamplingConfig output_config(const ExperimentConfig& cfg) {
  OutputResamplingConfig o;
  o.hidden = cfg.get_sizes("lars.output_hidden");
  o.truncation = Truncation::parse(cfg.get("lars.T"));
  o.epsilon = cfg.get_double("z.epsilon");
  return o;
}

std::string input_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = fnv1a64("");
  for (const char* key : {"data.images", "data.labels", "data.text"}) {
    const std::string& path = cfg.get(key);
    if (path.empty() || !std::filesystem::exists(path)) continue;
    std::ifstream in(path, std::ios::binary);
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    h = fnv1a64(bytes, h);
  }
  return hex64(h);
}

std::filesystem::path prepare_run_dir(const ExperimentConfig& cfg, const std::string& subcommand) {
  const std::filesystem::path dir = cfg.get("out.dir");
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "config.txt");
    if (!out) throw std::runtime_error("cannot write " + (dir / "config.txt").string());
    out << cfg.serialize();
  }
  nlohmann::json j;
  j["subcommand"] = subcommand;
  j["seed"] = cfg.get_u64("train.seed");
  j["config_hash"] = cfg.hash();
  j["input_hash"] = input_hash(cfg);
  std::ofstream out(dir / "run.json");
  out << j.dump(2) << '\n';
  return dir;
}

}  // namespace lars
