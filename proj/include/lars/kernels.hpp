#pragma once

#include <cstddef>
#include <span>

// Dense row-major kernels behind the autodiff tape.
//
// Two implementations share one signature set. `serial` is the plain
// triple-loop reference kept for tests and benchmarks; `parallel` is the
// register-blocked OpenMP version used at runtime. Every output element is
// produced by exactly one thread with a fixed accumulation order, so the
// parallel results do not depend on the thread count.
namespace lars::kernels {

namespace serial {

// C[m x n] (+)= A[m x k] * B[k x n]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);

// C[k x n] (+)= A[m x k]^T * B[m x n]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);

// C[m x k] (+)= A[m x n] * B[k x n]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);

// out[j] (+)= sum_i A[i, j]
void column_sums(std::size_t rows, std::size_t cols, std::span<const double> a,
                 std::span<double> out, bool accumulate);

}  // namespace serial

namespace parallel {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
void column_sums(std::size_t rows, std::size_t cols, std::span<const double> a,
                 std::span<double> out, bool accumulate);

}  // namespace parallel

// Out-of-place transpose of a rows x cols matrix.
void transpose(std::size_t rows, std::size_t cols, std::span<const double> a, std::span<double> out);

// Number of OpenMP threads the parallel kernels will use.
int max_threads();

}  // namespace lars::kernels
