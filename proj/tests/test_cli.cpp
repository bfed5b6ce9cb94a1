#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lars/csv.hpp"

using namespace lars;

namespace {

const char* cli() {
  const char* p = std::getenv("LARS_CLI");
  return p ? p : "lars";
}

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("lars_cli_" + name);
  std::filesystem::remove_all(p);
  return p;
}

int run(const std::string& args, const std::filesystem::path& err = {}) {
  std::string cmd = std::string(cli()) + " " + args + " > /dev/null";
  if (!err.empty()) cmd += " 2> " + err.string();
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kData = std::string(" -s data.images=") + LARS_SOURCE_DIR + "/data/mnist10k-images-idx3-ubyte.gz";
const std::string kSmallVae =
    " -s model.d_z=4 -s model.encoder=16,16 -s model.decoder=16 -s lars.hidden=8 -s data.train=200 -s data.test=20"
    " -s train.iwae_K=5 -s z.eval_S=2000 -s z.block=1000";

}  // namespace

TEST_CASE("toy2d writes a report with the KL column") {
  const auto out = scratch("toy");
  CHECK(run("toy2d -s toy.iters=20 -s toy.grid.n=120 -s toy.grid.check=false -s toy.export_n=10 -s toy.sigma=0.3"
            " -s out.dir=" + out.string()) == 0);
  const CsvTable t = read_csv(out / "report.csv");
  CHECK(t.column("kl_q_p") == 1);
  CHECK(std::filesystem::exists(out / "config.txt"));
  CHECK(std::filesystem::exists(out / "run.json"));
  CHECK(std::filesystem::exists(out / "densities.csv"));
  std::filesystem::remove_all(out);
}

TEST_CASE("rs-oracle reports a tiny KL on the mixture") {
  const auto out = scratch("rs");
  CHECK(run("rs-oracle -s toy.sigma=0.3 -s toy.grid.n=300 -s out.dir=" + out.string()) == 0);
  const CsvTable t = read_csv(out / "rs_oracle.csv");
  CHECK(std::stod(t.rows.at(0).at(t.column("kl"))) < 1e-3);
  std::filesystem::remove_all(out);
}

TEST_CASE("vae-train at zero iterations, then eval, rank and z-trace") {
  const auto out = scratch("vae");
  REQUIRE(run("vae-train -s train.iters=0 -s train.warmup=0" + kData + kSmallVae + " -s out.dir=" + out.string()) == 0);
  const CsvTable ev = read_csv(out / "eval.csv");
  CHECK(ev.header == std::vector<std::string>{"split", "nll_iwae", "elbo", "recon", "kl", "Z_eval", "S_eval", "T"});
  const double nll = std::stod(ev.rows[0][ev.column("nll_iwae")]);
  const double recon = std::stod(ev.rows[0][ev.column("recon")]);
  const double kl = std::stod(ev.rows[0][ev.column("kl")]);
  // an untrained decoder sits near 784 log 2 nats; IWAE improves on -ELBO
  CHECK(nll > 0.5 * 543.0);
  CHECK(nll <= -recon + kl + 5.0);
  const std::string ck = (out / "model.bin").string();
  const auto ev_out = scratch("vae_eval");
  CHECK(run("vae-eval --checkpoint " + ck + kData + kSmallVae + " -s out.dir=" + ev_out.string()) == 0);
  CHECK(read_csv(ev_out / "eval.csv").rows.size() == 1);
  const auto rk = scratch("rank");
  CHECK(run("rank --checkpoint " + ck + " -s train.samples=100 -s out.dir=" + rk.string()) == 0);
  const CsvTable r = read_csv(rk / "rank.csv");
  CHECK(r.header[0] == "index");
  CHECK(r.header[2] == "steps");
  CHECK(r.rows.size() == 100);
  const auto zt = scratch("ztrace");
  CHECK(run("z-trace --checkpoint " + ck + " -s z.eval_S=5000 -s out.dir=" + zt.string()) == 0);
  CHECK(read_csv(zt / "z_trace.csv").header == std::vector<std::string>{"S", "Z_running"});
  for (const auto& p : {out, ev_out, rk, zt}) std::filesystem::remove_all(p);
}

TEST_CASE("errors are machine readable with a nonzero status") {
  const auto err = std::filesystem::temp_directory_path() / "lars_cli_err.txt";
  CHECK(run("toy2d -s toy.nonsense=1", err) == 2);
  CHECK(read_all(err).find("\"error\":\"config\"") != std::string::npos);
  CHECK(run("vae-train -s data.images=/nonexistent.gz -s out.dir=" + scratch("bad").string(), err) == 1);
  CHECK(read_all(err).find("\"error\"") != std::string::npos);
  CHECK(run("no-such-command", err) != 0);
  std::filesystem::remove(err);
}
