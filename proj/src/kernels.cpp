#include "lars/kernels.hpp"

#include <algorithm>
#include <cassert>
#include <vector>

#include <omp.h>

namespace lars::kernels {

namespace serial {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  assert(a.size() >= m * k && b.size() >= k * n && c.size() >= m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = accumulate ? c[i * n + j] : 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  assert(a.size() >= m * k && b.size() >= m * n && c.size() >= k * n);
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = accumulate ? c[p * n + j] : 0.0;
      for (std::size_t i = 0; i < m; ++i) acc += a[i * k + p] * b[i * n + j];
      c[p * n + j] = acc;
    }
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  assert(a.size() >= m * n && b.size() >= k * n && c.size() >= m * k);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      double acc = accumulate ? c[i * k + p] : 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += a[i * n + j] * b[p * n + j];
      c[i * k + p] = acc;
    }
  }
}

void column_sums(std::size_t rows, std::size_t cols, std::span<const double> a,
                 std::span<double> out, bool accumulate) {
  for (std::size_t j = 0; j < cols; ++j) {
    double acc = accumulate ? out[j] : 0.0;
    for (std::size_t i = 0; i < rows; ++i) acc += a[i * cols + j];
    out[j] = acc;
  }
}

}  // namespace serial

namespace parallel {

namespace {

constexpr std::size_t kRowBlock = 4;
constexpr std::size_t kDepthBlock = 128;

// Work below this many multiply-adds stays on the calling thread.
constexpr std::size_t kParallelThreshold = 1 << 15;

// c rows [i0, i0+rows) += a rows * b, depth range [p0, p1).
inline void nn_block(std::size_t i0, std::size_t rows, std::size_t n, std::size_t k, std::size_t p0,
                     std::size_t p1, const double* a, const double* b, double* c) {
  if (rows == kRowBlock) {
    double* c0 = c + (i0 + 0) * n;
    double* c1 = c + (i0 + 1) * n;
    double* c2 = c + (i0 + 2) * n;
    double* c3 = c + (i0 + 3) * n;
    const double* a0 = a + (i0 + 0) * k;
    const double* a1 = a + (i0 + 1) * k;
    const double* a2 = a + (i0 + 2) * k;
    const double* a3 = a + (i0 + 3) * k;
    for (std::size_t p = p0; p < p1; ++p) {
      const double* bp = b + p * n;
      const double x0 = a0[p], x1 = a1[p], x2 = a2[p], x3 = a3[p];
      // binarized images are mostly zeros
      if (x0 == 0.0 && x1 == 0.0 && x2 == 0.0 && x3 == 0.0) continue;
#pragma omp simd
      for (std::size_t j = 0; j < n; ++j) {
        const double bj = bp[j];
        c0[j] += x0 * bj;
        c1[j] += x1 * bj;
        c2[j] += x2 * bj;
        c3[j] += x3 * bj;
      }
    }
    return;
  }
  for (std::size_t r = 0; r < rows; ++r) {
    double* ci = c + (i0 + r) * n;
    const double* ai = a + (i0 + r) * k;
    for (std::size_t p = p0; p < p1; ++p) {
      const double* bp = b + p * n;
      const double x = ai[p];
      if (x == 0.0) continue;
#pragma omp simd
      for (std::size_t j = 0; j < n; ++j) ci[j] += x * bp[j];
    }
  }
}

}  // namespace

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  assert(a.size() >= m * k && b.size() >= k * n && c.size() >= m * n);
  if (!accumulate) std::fill_n(c.begin(), m * n, 0.0);
  const std::size_t blocks = (m + kRowBlock - 1) / kRowBlock;
  const bool go_parallel = m * n * k >= kParallelThreshold;
  const double* ap = a.data();
  const double* bp = b.data();
  double* cp = c.data();
  // Depth blocks are visited in ascending order for every row, so each
  // element sees the same summation order as the serial reference.
  for (std::size_t p0 = 0; p0 < k; p0 += kDepthBlock) {
    const std::size_t p1 = std::min(k, p0 + kDepthBlock);
#pragma omp parallel for schedule(static) if (go_parallel)
    for (std::size_t blk = 0; blk < blocks; ++blk) {
      const std::size_t i0 = blk * kRowBlock;
      nn_block(i0, std::min(kRowBlock, m - i0), n, k, p0, p1, ap, bp, cp);
    }
  }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  assert(a.size() >= m * k && b.size() >= m * n && c.size() >= k * n);
  if (!accumulate) std::fill_n(c.begin(), k * n, 0.0);
  const bool go_parallel = m * n * k >= kParallelThreshold;
  const double* ap = a.data();
  const double* bp = b.data();
  double* cp = c.data();
  const std::size_t blocks = (k + kRowBlock - 1) / kRowBlock;
#pragma omp parallel for schedule(static) if (go_parallel)
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    const std::size_t p0 = blk * kRowBlock;
    const std::size_t rows = std::min(kRowBlock, k - p0);
    for (std::size_t i = 0; i < m; ++i) {
      const double* bi = bp + i * n;
      const double* ai = ap + i * k + p0;
      for (std::size_t r = 0; r < rows; ++r) {
        const double x = ai[r];
        if (x == 0.0) continue;
        double* cr = cp + (p0 + r) * n;
#pragma omp simd
        for (std::size_t j = 0; j < n; ++j) cr[j] += x * bi[j];
      }
    }
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  assert(a.size() >= m * n && b.size() >= k * n && c.size() >= m * k);
  // A * B^T == A * (B^T); transposing B turns the inner loop into a
  // contiguous axpy instead of a horizontal reduction.
  std::vector<double> bt(n * k);
  transpose(k, n, b, bt);
  gemm_nn(m, k, n, a, bt, c, accumulate);
}

void column_sums(std::size_t rows, std::size_t cols, std::span<const double> a,
                 std::span<double> out, bool accumulate) {
  if (!accumulate) std::fill_n(out.begin(), cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* ai = a.data() + i * cols;
#pragma omp simd
    for (std::size_t j = 0; j < cols; ++j) out[j] += ai[j];
  }
}

}  // namespace parallel

void transpose(std::size_t rows, std::size_t cols, std::span<const double> a, std::span<double> out) {
  constexpr std::size_t tile = 32;
  for (std::size_t i0 = 0; i0 < rows; i0 += tile) {
    for (std::size_t j0 = 0; j0 < cols; j0 += tile) {
      const std::size_t i1 = std::min(rows, i0 + tile);
      const std::size_t j1 = std::min(cols, j0 + tile);
      for (std::size_t i = i0; i < i1; ++i)
        for (std::size_t j = j0; j < j1; ++j) out[j * rows + i] = a[i * cols + j];
    }
  }
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace lars::kernels
