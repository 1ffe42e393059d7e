#pragma once

#include <cstddef>

namespace rcd::detail {

/// C[m x n] += A[m x k] * B[k x n]; all operands row-major with the given
/// leading dimensions. Cache-blocked with packed panels; results are
/// bitwise reproducible for identical inputs.
void gemm_accumulate(std::size_t m, std::size_t n, std::size_t k,
                     const double* a, std::size_t lda,
                     const double* b, std::size_t ldb,
                     double* c, std::size_t ldc);

/// C[m x n] += A^T * B where A is stored [k x m] row-major.
void gemm_at_b_accumulate(std::size_t m, std::size_t n, std::size_t k,
                          const double* a, std::size_t lda,
                          const double* b, std::size_t ldb,
                          double* c, std::size_t ldc);

/// C[m x n] += A * B^T where B is stored [n x k] row-major.
void gemm_a_bt_accumulate(std::size_t m, std::size_t n, std::size_t k,
                          const double* a, std::size_t lda,
                          const double* b, std::size_t ldb,
                          double* c, std::size_t ldc);

}  // namespace rcd::detail
