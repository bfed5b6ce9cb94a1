#include <doctest.h>

#include <omp.h>

#include <cmath>
#include <vector>

#include "lars/kernels.hpp"
#include "lars/rng.hpp"

using namespace lars;

namespace {

std::vector<double> rand_vec(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

double max_rel(const std::vector<double>& a, const std::vector<double>& b) {
  double w = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) w = std::max(w, std::abs(a[i] - b[i]) / (1.0 + std::abs(b[i])));
  return w;
}

struct Shape {
  std::size_t m, n, k;
};
const Shape kShapes[] = {{1, 1, 1}, {3, 5, 7}, {17, 9, 33}, {128, 300, 50}, {64, 1, 129}, {5, 131, 2}};

}  // namespace

TEST_CASE("parallel gemm_nn matches the serial reference") {
  for (const auto s : kShapes) {
    const auto a = rand_vec(s.m * s.k, 1), b = rand_vec(s.k * s.n, 2), c0 = rand_vec(s.m * s.n, 3);
    for (bool acc : {false, true}) {
      auto cs = c0, cp = c0;
      kernels::serial::gemm_nn(s.m, s.n, s.k, a, b, cs, acc);
      kernels::parallel::gemm_nn(s.m, s.n, s.k, a, b, cp, acc);
      CHECK(max_rel(cp, cs) < 1e-12);
    }
  }
}

TEST_CASE("parallel gemm_tn and gemm_nt match the serial reference") {
  for (const auto s : kShapes) {
    {
      const auto a = rand_vec(s.m * s.k, 4), b = rand_vec(s.m * s.n, 5), c0 = rand_vec(s.k * s.n, 6);
      auto cs = c0, cp = c0;
      kernels::serial::gemm_tn(s.m, s.n, s.k, a, b, cs, true);
      kernels::parallel::gemm_tn(s.m, s.n, s.k, a, b, cp, true);
      CHECK(max_rel(cp, cs) < 1e-12);
    }
    {
      const auto a = rand_vec(s.m * s.n, 7), b = rand_vec(s.k * s.n, 8);
      std::vector<double> cs(s.m * s.k), cp(s.m * s.k);
      kernels::serial::gemm_nt(s.m, s.n, s.k, a, b, cs, false);
      kernels::parallel::gemm_nt(s.m, s.n, s.k, a, b, cp, false);
      CHECK(max_rel(cp, cs) < 1e-12);
    }
  }
}

TEST_CASE("gemm against a hand-computed product") {
  // [1 2; 3 4] * [5 6; 7 8] = [19 22; 43 50]
  const std::vector<double> a = {1, 2, 3, 4}, b = {5, 6, 7, 8};
  std::vector<double> c(4);
  kernels::parallel::gemm_nn(2, 2, 2, a, b, c, false);
  CHECK(c == std::vector<double>{19, 22, 43, 50});
  kernels::serial::gemm_tn(2, 2, 2, a, b, c, false);  // a^T b = [26 30; 38 44]
  CHECK(c == std::vector<double>{26, 30, 38, 44});
  kernels::serial::gemm_nt(2, 2, 2, a, b, c, false);  // a b^T = [17 23; 39 53]
  CHECK(c == std::vector<double>{17, 23, 39, 53});
}

TEST_CASE("parallel kernels are bit-identical across thread counts") {
  const std::size_t m = 257, n = 130, k = 61;
  const auto a = rand_vec(m * k, 9), b = rand_vec(k * n, 10), bt = rand_vec(m * n, 11);
  const int keep = omp_get_max_threads();
  std::vector<std::vector<double>> outs;
  for (int threads : {1, 3, 8}) {
    omp_set_num_threads(threads);
    std::vector<double> c1(m * n), c2(k * n), c3(n);
    kernels::parallel::gemm_nn(m, n, k, a, b, c1, false);
    kernels::parallel::gemm_tn(m, n, k, a, bt, c2, false);
    kernels::parallel::column_sums(m, n, bt, c3, false);
    c1.insert(c1.end(), c2.begin(), c2.end());
    c1.insert(c1.end(), c3.begin(), c3.end());
    outs.push_back(c1);
  }
  omp_set_num_threads(keep);
  CHECK(outs[0] == outs[1]);
  CHECK(outs[0] == outs[2]);
}

TEST_CASE("column sums and transpose") {
  const std::vector<double> a = {1, 2, 3, 4, 5, 6};  // 2 x 3
  std::vector<double> s(3, 1.0), p(3, 1.0);
  kernels::serial::column_sums(2, 3, a, s, true);
  kernels::parallel::column_sums(2, 3, a, p, true);
  CHECK(s == std::vector<double>{6, 8, 10});
  CHECK(p == s);
  std::vector<double> t(6);
  kernels::transpose(2, 3, a, t);
  CHECK(t == std::vector<double>{1, 4, 2, 5, 3, 6});
}
