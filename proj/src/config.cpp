#include "lars/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lars/errors.hpp"
#include "lars/rng.hpp"

namespace lars {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::map<std::string, std::string>& known_config_keys() {
  static const std::map<std::string, std::string> keys = {
      {"data.source", "idx"},
      {"data.images", "data/mnist10k-images-idx3-ubyte.gz"},
      {"data.labels", ""},
      {"data.text", ""},
      {"data.binarization", "dynamic"},
      {"data.subset", "0"},
      {"data.train", "9000"},
      {"data.valid", "0"},
      {"data.test", "1000"},
      {"model.d_z", "16"},
      {"model.encoder", "300,300"},
      {"model.decoder", "300,300"},
      {"model.prior", "lars"},
      {"model.flow_couplings", "4"},
      {"model.flow_hidden", "100,100"},
      {"lars.T", "100"},
      {"lars.hidden", "100,100"},
      {"lars.output_hidden", "300,300"},
      {"z.epsilon", "0.1"},
      {"z.train_S", "1024"},
      {"z.eval_S", "100000000"},
      {"z.block", "100000"},
      {"z.antithetic", "false"},
      {"train.iters", "200000"},
      {"train.lr", "3e-4"},
      {"train.lr_final", "1e-4"},
      {"train.decay_at", "50000"},
      {"train.warmup", "10000"},
      {"train.batch", "128"},
      {"train.seed", "1"},
      {"train.log_every", "1000"},
      {"train.iwae_K", "1000"},
      {"train.samples", "10000"},
      {"toy.spacing", "1.0"},
      {"toy.target_kl", "1.8"},
      {"toy.sigma", "0"},
      {"toy.sigma_lo", "0.05"},
      {"toy.sigma_hi", "1.0"},
      {"toy.proposal", "normal"},
      {"toy.hidden", "10,10"},
      {"toy.train_acceptance", "true"},
      {"toy.flow_couplings", "4"},
      {"toy.flow_hidden", "100,100"},
      {"toy.iters", "200000"},
      {"toy.lr", "3e-4"},
      {"toy.batch", "128"},
      {"toy.train_S", "1024"},
      {"toy.T", "inf"},
      {"toy.grid.min", "-8"},
      {"toy.grid.max", "8"},
      {"toy.grid.n", "600"},
      {"toy.grid.check", "true"},
      {"toy.export_n", "200"},
      {"out.dir", "runs/latest"},
  };
  return keys;
}

ExperimentConfig::ExperimentConfig() : values_(known_config_keys()) {}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    try {
      cfg.set(key, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  if (!known_config_keys().contains(key)) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
}

void ExperimentConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override must be key=value: " + assignment);
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

const std::string& ExperimentConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

double ExperimentConfig::get_double(const std::string& key) const {
  const std::string& s = get(key);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError(key + ": not a number: '" + s + "'");
  return v;
}

std::int64_t ExperimentConfig::get_int(const std::string& key) const {
  const std::string& s = get(key);
  std::int64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc() && p == s.data() + s.size()) return v;
  // allow 1e5-style integers
  const double d = get_double(key);
  if (d != static_cast<double>(static_cast<std::int64_t>(d))) throw ConfigError(key + ": not an integer: '" + s + "'");
  return static_cast<std::int64_t>(d);
}

std::size_t ExperimentConfig::get_size(const std::string& key) const {
  const auto v = get_int(key);
  if (v < 0) throw ConfigError(key + ": must be non-negative");
  return static_cast<std::size_t>(v);
}

std::uint64_t ExperimentConfig::get_u64(const std::string& key) const { return get_size(key); }

bool ExperimentConfig::get_bool(const std::string& key) const {
  const std::string& s = get(key);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(key + ": not a boolean: '" + s + "'");
}

std::vector<std::size_t> ExperimentConfig::get_sizes(const std::string& key) const {
  const std::string& s = get(key);
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    std::size_t v = 0;
    const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || p != item.data() + item.size() || v == 0)
      throw ConfigError(key + ": bad list entry '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::string ExperimentConfig::serialize() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::string ExperimentConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(serialize())));
  return buf;
}

}  // namespace lars
