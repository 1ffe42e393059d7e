#include "rcd/gemm.hpp"

#include <algorithm>
#include <vector>

namespace rcd::detail {
namespace {

constexpr std::size_t kMr = 4;
constexpr std::size_t kNr = 8;
constexpr std::size_t kKc = 256;
constexpr std::size_t kMc = 64;
constexpr std::size_t kNc = 1024;

// Packs a kc x nc block of B into kNr-wide column strips, zero-filling the tail.
void pack_b(std::size_t kc, std::size_t nc, const double* b,
            std::size_t row_stride, std::size_t col_stride, double* out) {
  for (std::size_t j0 = 0; j0 < nc; j0 += kNr) {
    const std::size_t nr = std::min(kNr, nc - j0);
    for (std::size_t p = 0; p < kc; ++p) {
      for (std::size_t j = 0; j < nr; ++j) {
        out[j] = b[p * row_stride + (j0 + j) * col_stride];
      }
      for (std::size_t j = nr; j < kNr; ++j) out[j] = 0.0;
      out += kNr;
    }
  }
}

void pack_a(std::size_t mc, std::size_t kc, const double* a,
            std::size_t row_stride, std::size_t col_stride, double* out) {
  for (std::size_t i0 = 0; i0 < mc; i0 += kMr) {
    const std::size_t mr = std::min(kMr, mc - i0);
    for (std::size_t p = 0; p < kc; ++p) {
      for (std::size_t i = 0; i < mr; ++i) {
        out[i] = a[(i0 + i) * row_stride + p * col_stride];
      }
      for (std::size_t i = mr; i < kMr; ++i) out[i] = 0.0;
      out += kMr;
    }
  }
}

inline void micro_kernel(std::size_t kc, const double* __restrict ap,
                         const double* __restrict bp, double* c,
                         std::size_t ldc, std::size_t mr, std::size_t nr) {
  double acc[kMr][kNr] = {};
  for (std::size_t p = 0; p < kc; ++p) {
    const double* a = ap + p * kMr;
    const double* b = bp + p * kNr;
    for (std::size_t i = 0; i < kMr; ++i) {
      for (std::size_t j = 0; j < kNr; ++j) {
        acc[i][j] += a[i] * b[j];
      }
    }
  }
  for (std::size_t i = 0; i < mr; ++i) {
    for (std::size_t j = 0; j < nr; ++j) c[i * ldc + j] += acc[i][j];
  }
}

// Generic strided driver: element (i,p) of A at a[i*ars + p*acs],
// element (p,j) of B at b[p*brs + j*bcs].
void gemm_strided(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t ars, std::size_t acs, const double* b,
                  std::size_t brs, std::size_t bcs, double* c,
                  std::size_t ldc) {
  if (m == 0 || n == 0 || k == 0) return;
  thread_local std::vector<double> a_pack;
  thread_local std::vector<double> b_pack;
  b_pack.resize(kKc * (kNc + kNr));
  a_pack.resize(kKc * (kMc + kMr));

  for (std::size_t jc = 0; jc < n; jc += kNc) {
    const std::size_t nc = std::min(kNc, n - jc);
    for (std::size_t pc = 0; pc < k; pc += kKc) {
      const std::size_t kc = std::min(kKc, k - pc);
      pack_b(kc, nc, b + pc * brs + jc * bcs, brs, bcs, b_pack.data());
      for (std::size_t ic = 0; ic < m; ic += kMc) {
        const std::size_t mc = std::min(kMc, m - ic);
        pack_a(mc, kc, a + ic * ars + pc * acs, ars, acs, a_pack.data());
        for (std::size_t jr = 0; jr < nc; jr += kNr) {
          const std::size_t nr = std::min(kNr, nc - jr);
          const double* bp = b_pack.data() + (jr / kNr) * kc * kNr;
          for (std::size_t ir = 0; ir < mc; ir += kMr) {
            const std::size_t mr = std::min(kMr, mc - ir);
            const double* ap = a_pack.data() + (ir / kMr) * kc * kMr;
            micro_kernel(kc, ap, bp, c + (ic + ir) * ldc + jc + jr, ldc, mr,
                         nr);
          }
        }
      }
    }
  }
}

}  // namespace

void gemm_accumulate(std::size_t m, std::size_t n, std::size_t k,
                     const double* a, std::size_t lda, const double* b,
                     std::size_t ldb, double* c, std::size_t ldc) {
  gemm_strided(m, n, k, a, lda, 1, b, ldb, 1, c, ldc);
}

void gemm_at_b_accumulate(std::size_t m, std::size_t n, std::size_t k,
                          const double* a, std::size_t lda, const double* b,
                          std::size_t ldb, double* c, std::size_t ldc) {
  gemm_strided(m, n, k, a, 1, lda, b, ldb, 1, c, ldc);
}

void gemm_a_bt_accumulate(std::size_t m, std::size_t n, std::size_t k,
                          const double* a, std::size_t lda, const double* b,
                          std::size_t ldb, double* c, std::size_t ldc) {
  gemm_strided(m, n, k, a, lda, 1, b, 1, ldb, c, ldc);
}

}  // namespace rcd::detail
