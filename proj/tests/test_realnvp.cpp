#include <doctest.h>

#include <cmath>

#include "lars/quadrature.hpp"
#include "lars/realnvp.hpp"
#include "support.hpp"

using namespace lars;

namespace {

void perturb(ParamStore& p, std::uint64_t seed, double scale) {
  Rng rng(seed);
  for (auto& e : p.entries())
    for (auto& v : e.values) v += scale * rng.normal();
}

}  // namespace

TEST_CASE("flow starts as the identity") {
  const RealNvpFlow flow(RealNvpSpec{2, 4, {16, 16}});
  ParamStore p;
  Rng rng(1);
  flow.init(p, rng);
  Rng xr(2);
  const Matrix x = StandardNormal(2).sample(50, xr);
  Tape t(static_cast<const ParamStore&>(p));
  Var ld = t.constant(Matrix(50, 1));
  const Var y = flow.forward(t, t.constant(x), &ld);
  // even number of couplings returns the halves to their original order
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.value().data[i] == doctest::Approx(x.data[i]).epsilon(1e-15));
  for (double v : ld.value().data) CHECK(v == 0.0);
  const auto lp = flow.log_prob(t, t.constant(x)).value().data;
  const auto want = StandardNormal(2).log_prob(x);
  for (std::size_t i = 0; i < lp.size(); ++i) CHECK(lp[i] == doctest::Approx(want[i]).epsilon(1e-14));
}

TEST_CASE("inverse undoes forward and log-determinants cancel") {
  for (std::size_t dim : {2u, 3u, 5u}) {
    const RealNvpFlow flow(RealNvpSpec{dim, 3, {8}});
    ParamStore p;
    Rng rng(3);
    flow.init(p, rng);
    perturb(p, 4, 0.4);
    Rng xr(5);
    const Matrix u = StandardNormal(dim).sample(40, xr);
    Tape t(static_cast<const ParamStore&>(p));
    Var fwd = t.constant(Matrix(40, 1));
    Var inv = t.constant(Matrix(40, 1));
    const Var x = flow.forward(t, t.constant(u), &fwd);
    const Var back = flow.inverse(t, x, &inv);
    for (std::size_t i = 0; i < u.size(); ++i) CHECK(back.value().data[i] == doctest::Approx(u.data[i]).epsilon(1e-12));
    for (std::size_t i = 0; i < 40; ++i) CHECK(fwd.value().data[i] + inv.value().data[i] == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("perturbed flow density still integrates to one") {
  const RealNvpFlow flow(RealNvpSpec{2, 4, {16, 16}});
  ParamStore p;
  Rng rng(6);
  flow.init(p, rng);
  perturb(p, 7, 0.3);
  const BoundProposal d(flow, p);
  CHECK(integrate_exp(log_density_of(d), GridSpec{-12, 12, 500}) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("flow log density gradient matches central differences") {
  const RealNvpFlow flow(RealNvpSpec{2, 2, {6}});
  ParamStore p;
  Rng rng(8);
  flow.init(p, rng);
  perturb(p, 9, 0.3);
  Rng xr(10);
  const Matrix x = StandardNormal(2).sample(7, xr);
  const auto r = testing::fd_check(p, [&](Tape& t) { return mean(flow.log_prob(t, t.constant(x))); });
  INFO(r.where);
  CHECK(r.worst < 1e-6);
  const auto rs = testing::fd_check(p, [&](Tape& t) {
    Rng s(11);
    return mean(square(flow.sample(t, 5, s)));
  });
  CHECK(rs.worst < 1e-6);
}

TEST_CASE("flow samples follow the flow density") {
  const RealNvpFlow flow(RealNvpSpec{2, 4, {16, 16}});
  ParamStore p;
  Rng rng(12);
  flow.init(p, rng);
  perturb(p, 13, 0.3);
  const BoundProposal d(flow, p);
  Rng sr(14);
  const Matrix s = d.sample(100'000, sr);
  // E[x0] by samples vs quadrature
  const GridSpec g{-12, 12, 400};
  const auto lp = evaluate_on_grid(log_density_of(d), g);
  const Matrix pts = grid_points(g);
  std::vector<double> f(lp.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = pts(i, 0) * std::exp(lp[i]);
  const double want = trapezoid(g, f);
  double m = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < s.rows; ++i) {
    m += s(i, 0);
    m2 += s(i, 0) * s(i, 0);
  }
  m /= 1e5;
  const double se = std::sqrt((m2 / 1e5 - m * m) / 1e5);
  CHECK(std::abs(m - want) < 4.0 * se);
}
