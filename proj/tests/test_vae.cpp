#include <doctest.h>

#include <omp.h>

#include <cmath>
#include <filesystem>

#include "lars/errors.hpp"
#include "lars/quadrature.hpp"
#include "lars/vae.hpp"
#include "support.hpp"

using namespace lars;

namespace {

VaeConfig small_config(PriorKind prior, std::size_t data_dim = 12, std::size_t d_z = 2) {
  VaeConfig c;
  c.data_dim = data_dim;
  c.d_z = d_z;
  c.encoder_hidden = {8, 6};
  c.decoder_hidden = {7};
  c.prior = prior;
  c.flow_couplings = 2;
  c.flow_hidden = {5};
  c.acceptance_hidden = {6};
  c.truncation = Truncation::after(100);
  return c;
}

Matrix images(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) x(i, j) = (i % 2 == 0) == (j < d / 2) ? 0.9 * rng.uniform() : 0.1 * rng.uniform();
  return x;
}

void zero_entries(ParamStore& p, const std::string& prefix) {
  for (auto& e : p.entries())
    if (e.name.starts_with(prefix)) std::fill(e.values.begin(), e.values.end(), 0.0);
}

TrainConfig quick_train(std::size_t iters) {
  TrainConfig t;
  t.iterations = iters;
  t.warmup = iters / 2;
  t.decay_at = iters / 2;
  t.batch = 16;
  t.log_every = 5;
  t.lr = 1e-3;
  t.eval_S = 20'000;
  t.eval_block = 5000;
  return t;
}

}  // namespace

TEST_CASE("zeroed decoder gives the uniform Bernoulli likelihood") {
  VaeModel m(small_config(PriorKind::kStandard, 784, 4));
  m.init(1);
  zero_entries(m.params, "dec.");
  Tape t(static_cast<const ParamStore&>(m.params));
  Rng noise(2), zr(3);
  const Matrix x = binarize_fixed(images(3, 784, 4), Binarization::kDynamic, 5);
  const ElboTerms e = elbo_terms(m, t, x, noise, zr, ZMode::kEval);
  for (double r : e.recon.value().data) CHECK(r == doctest::Approx(-784.0 * std::log(2.0)).epsilon(1e-13));
}

TEST_CASE("posterior equal to the prior has zero KL in expectation") {
  VaeModel m(small_config(PriorKind::kStandard));
  m.init(6);
  zero_entries(m.params, "enc.mean");
  zero_entries(m.params, "enc.log_std");
  const Matrix x = binarize_fixed(images(10'000, 12, 7), Binarization::kDynamic, 8);
  Tape t(static_cast<const ParamStore&>(m.params));
  Rng noise(9), zr(10);
  const auto kl = elbo_terms(m, t, x, noise, zr, ZMode::kEval).kl.value().data;
  double mean = 0.0, sq = 0.0;
  for (double v : kl) mean += v / 1e4;
  for (double v : kl) sq += (v - mean) * (v - mean);
  CHECK(std::abs(mean) < 1e-12 + 3.0 * std::sqrt(sq / 1e4 / 1e4));
}

TEST_CASE("non-binary data is rejected") {
  VaeModel m(small_config(PriorKind::kStandard));
  m.init(1);
  Tape t(static_cast<const ParamStore&>(m.params));
  Rng a(1), b(2);
  CHECK_THROWS_AS(elbo_terms(m, t, images(2, 12, 1), a, b, ZMode::kEval), ContractViolation);
}

TEST_CASE("constant acceptance prior trains exactly like the standard prior") {
  const Matrix data = images(64, 12, 11);
  VaeConfig lc = small_config(PriorKind::kLars);
  lc.constant_acceptance = 0.3;
  VaeModel lars(lc), plain(small_config(PriorKind::kStandard));
  lars.init(12);
  plain.init(12);
  TrainConfig tc = quick_train(40);
  tc.log_every = 1;
  const TrainResult a = train(lars, tc, data, Binarization::kDynamic);
  const TrainResult b = train(plain, tc, data, Binarization::kDynamic);
  REQUIRE(a.log.size() == 40);
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(std::abs(a.log[i].elbo - b.log[i].elbo) <= 1e-10);
    CHECK(std::abs(a.log[i].kl - b.log[i].kl) <= 1e-10);
    CHECK(std::abs(a.log[i].recon - b.log[i].recon) <= 1e-10);
  }
  CHECK(lars.z_eval == 0.3);
}

TEST_CASE("zero iterations leave the initialization untouched") {
  VaeModel m(small_config(PriorKind::kLars));
  m.init(13);
  const ParamStore init = m.params;
  TrainConfig tc = quick_train(0);
  tc.warmup = 0;
  train(m, tc, images(8, 12, 1), Binarization::kDynamic);
  CHECK(m.params == init);
}

TEST_CASE("ELBO with a resampled prior matches central differences") {
  for (auto kind : {PriorKind::kLars, PriorKind::kLarsRealNvp})
    for (auto T : {Truncation::after(100), Truncation::after(3), Truncation::infinite()}) {
      VaeConfig c = small_config(kind);
      c.truncation = T;
      VaeModel m(c);
      m.init(14);
      Rng jitter(15);
      for (auto& e : m.params.entries())
        for (auto& v : e.values) v += 0.1 * jitter.normal();
      const Matrix x = binarize_fixed(images(6, 12, 16), Binarization::kDynamic, 17);
      const ZEstimatorState keep = m.z_state;
      const auto r = testing::fd_check(m.params, [&](Tape& t) {
        m.z_state = keep;
        m.z_state.epsilon = 1.0;
        m.z_state.train_S = 16;
        Rng noise(18), zr(19);
        const ElboTerms e = elbo_terms(m, t, x, noise, zr, ZMode::kTrain);
        return neg(mean(e.recon - e.kl));
      });
      INFO(prior_kind_name(kind) << " T=" << T.str() << " " << r.where);
      CHECK(r.worst < 1e-5);
    }
}

TEST_CASE("IWAE with one sample is the negative single-sample ELBO") {
  VaeModel m(small_config(PriorKind::kLars));
  m.init(20);
  m.z_eval = 0.4;
  const Matrix x = binarize_fixed(images(1, 12, 21), Binarization::kDynamic, 22);
  Rng r1(23), r2(23), zr(0);
  const double nll = iwae_nll(m, x.row_span(0), 1, r1);
  Tape t(static_cast<const ParamStore&>(m.params));
  const ElboTerms e = elbo_terms(m, t, x, r2, zr, ZMode::kEval);
  CHECK(nll == doctest::Approx(-(e.recon.scalar() - e.kl.scalar())).epsilon(1e-12));
}

TEST_CASE("more importance samples tighten the bound") {
  VaeModel m(small_config(PriorKind::kStandard));
  m.init(24);
  const Matrix x = binarize_fixed(images(200, 12, 25), Binarization::kDynamic, 26);
  const EvalRow k1 = evaluate(m, x, 1, 27, "test");
  const EvalRow k64 = evaluate(m, x, 64, 27, "test");
  CHECK(k64.nll_iwae <= k1.nll_iwae + 2.0 * k1.nll_se);
  CHECK(k64.nll_iwae < k1.nll_iwae);
  CHECK(-k1.elbo >= k64.nll_iwae - 2.0 * k1.nll_se);
}

TEST_CASE("IWAE converges to the quadrature marginal likelihood") {
  VaeConfig c = small_config(PriorKind::kLars, 10, 2);
  VaeModel m(c);
  m.init(28);
  // broad posterior keeps the importance weights tame
  zero_entries(m.params, "enc.mean");
  zero_entries(m.params, "enc.log_std");
  estimate_eval_Z(m, 400'000, 29, 50'000, false);
  const Matrix x = binarize_fixed(images(3, 10, 30), Binarization::kDynamic, 31);
  const GridSpec g{-8, 8, 301};
  const Matrix zs = grid_points(g);
  Tape t(static_cast<const ParamStore&>(m.params));
  const Var zv = t.constant(zs);
  const auto log_prior = m.log_prior(t, zv, m.z_eval).value().data;
  const Var logits = m.decode_logits(t, zv);
  for (std::size_t i = 0; i < x.rows; ++i) {
    Matrix xi(zs.rows, 10);
    for (std::size_t r = 0; r < zs.rows; ++r) std::copy(x.row_span(i).begin(), x.row_span(i).end(), xi.row_span(r).begin());
    const auto ll = bernoulli_log_prob(logits, xi).value().data;
    std::vector<double> joint(ll.size());
    for (std::size_t r = 0; r < ll.size(); ++r) joint[r] = ll[r] + log_prior[r];
    const double want = -std::log(integrate_exp(joint, g));
    Rng rng(32 + i);
    CHECK(std::abs(iwae_nll(m, x.row_span(i), 20'000, rng) - want) < 0.02);
  }
}

TEST_CASE("evaluation does not depend on the thread count") {
  VaeModel m(small_config(PriorKind::kLars));
  m.init(33);
  m.z_eval = 0.5;
  const Matrix x = binarize_fixed(images(20, 12, 34), Binarization::kDynamic, 35);
  const int keep = omp_get_max_threads();
  omp_set_num_threads(1);
  const EvalRow a = evaluate(m, x, 10, 36, "t");
  omp_set_num_threads(4);
  const EvalRow b = evaluate(m, x, 10, 36, "t");
  omp_set_num_threads(keep);
  CHECK(a.per_point_nll == b.per_point_nll);
  CHECK(a.per_point_kl == b.per_point_kl);
}

TEST_CASE("checkpoint and metadata round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "lars_vae_ckpt";
  std::filesystem::create_directories(dir);
  VaeConfig c = small_config(PriorKind::kLarsRealNvp);
  c.truncation = Truncation::after(10);
  VaeModel m(c);
  m.init(37);
  m.z_eval = 0.123;
  m.s_eval = 1000;
  m.z_state.ema = 0.2;
  save_model(m, dir / "model.bin", "abc123");
  const auto back = load_model(dir / "model.bin");
  CHECK(back->params == m.params);
  CHECK(back->z_eval == 0.123);
  CHECK(back->s_eval == 1000);
  CHECK(back->seed == 37);
  CHECK(back->config().truncation == Truncation::after(10));
  CHECK(back->config().prior == PriorKind::kLarsRealNvp);
  CHECK(std::filesystem::exists(dir / "model.bin.json"));

  VaeModel other(small_config(PriorKind::kStandard));
  other.init(1);
  save_checkpoint(other.params, dir / "model.bin");
  CHECK_THROWS_AS(load_model(dir / "model.bin"), ParseError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("post-hoc fit keeps reconstructions and lowers the KL term") {
  const Matrix data = images(200, 12, 38);
  const Matrix held = binarize_fixed(images(100, 12, 39), Binarization::kDynamic, 40);
  VaeModel plain(small_config(PriorKind::kStandard));
  plain.init(41);
  train(plain, quick_train(300), data, Binarization::kDynamic);
  const EvalRow plain_eval = evaluate(plain, held, 0, 42, "plain");

  VaeModel target(small_config(PriorKind::kLars));
  target.init(41);
  TrainConfig tc = quick_train(300);
  tc.seed = 43;
  const PosthocReport rep = posthoc_fit(plain, target, tc, data, Binarization::kDynamic, held, 0, 42);
  CHECK(rep.before.per_point_recon == plain_eval.per_point_recon);
  CHECK(rep.after.per_point_recon == plain_eval.per_point_recon);
  for (std::size_t i = 0; i < held.rows; ++i)
    CHECK(rep.before.per_point_kl[i] == doctest::Approx(plain_eval.per_point_kl[i]).epsilon(1e-12));
  CHECK(rep.after.kl < rep.before.kl);
  CHECK(rep.after.z_eval > 0.0);
  CHECK(rep.after.z_eval < 1.0);
  for (const auto& e : target.params.entries())
    if (e.name.starts_with("enc.") || e.name.starts_with("dec.")) CHECK(e.values == plain.params.at(e.name).values);
}

TEST_CASE("ranking sorts by acceptance and ties for a constant") {
  VaeConfig c = small_config(PriorKind::kLars);
  c.constant_acceptance = 0.25;
  VaeModel flat(c);
  flat.init(44);
  Rng rng(45);
  for (const auto& s : rank_samples(flat, 50, rng)) CHECK(s.a == 0.25);

  VaeModel m(small_config(PriorKind::kLars));
  m.init(46);
  const auto ranked = rank_samples(m, 300, rng);
  std::vector<bool> seen(301, false);
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (i > 0) CHECK(ranked[i - 1].a >= ranked[i].a);
    seen[ranked[i].draw] = true;
    CHECK(ranked[i].decoded_mean.size() == 12);
  }
  CHECK(std::count(seen.begin() + 1, seen.end(), true) == 300);
}
