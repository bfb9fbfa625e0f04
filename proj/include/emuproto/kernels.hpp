#pragma once

#include <cstdint>

// Dense numeric kernels.
//
// The default entry points are the fast path: sgemm goes through BLAS, the
// rest are OpenMP loops. kernels::serial holds plain single-threaded
// reference loops; tests assert the two paths agree (bitwise for the
// order-preserving ops, to tolerance for sgemm whose accumulation order
// differs) and tools/bench_kernels compares their throughput.
//
// Determinism contract: every output element is produced by exactly one
// thread with a fixed accumulation order, so results do not depend on the
// number of OpenMP threads.

namespace emuproto::kernels {

// C[M,N] = A[M,K] * B[K,N], row-major.
void matmul(std::int64_t m, std::int64_t n, std::int64_t k, const float* a,
            const float* b, float* c);

// dC-side gemm forms used by matmul backward:
//   nt: C[M,N] += A[M,K] * B[N,K]^T    tn: C[M,N] += A[K,M]^T * B[K,N]
void matmul_nt_acc(std::int64_t m, std::int64_t n, std::int64_t k,
                   const float* a, const float* b, float* c);
void matmul_tn_acc(std::int64_t m, std::int64_t n, std::int64_t k,
                   const float* a, const float* b, float* c);

void add(std::int64_t n, const float* a, const float* b, float* out);
void sub(std::int64_t n, const float* a, const float* b, float* out);
void mul(std::int64_t n, const float* a, const float* b, float* out);
void scale(std::int64_t n, const float* a, float s, float* out);
void relu(std::int64_t n, const float* a, float* out);
// out += mask(a > 0) * g  (ReLU backward accumulate)
void relu_grad_acc(std::int64_t n, const float* a, const float* g, float* out);
void axpy(std::int64_t n, float alpha, const float* x, float* y);

// rows of `a` are vectors of width `cols`
void bias_add(std::int64_t rows, std::int64_t cols, const float* a,
              const float* bias, float* out);
void gather_rows(std::int64_t n_idx, std::int64_t cols, const float* a,
                 const std::int32_t* idx, float* out);
// out[idx[i], :] += a[i, :] over all i, fixed index order per output row
void scatter_rows_acc(std::int64_t n_idx, std::int64_t n_out,
                      std::int64_t cols, const float* a,
                      const std::int32_t* idx, float* out);
void segment_sum(std::int64_t n_in, std::int64_t n_seg, std::int64_t cols,
                 const float* a, const std::int32_t* seg, float* out);
// segment counts written to `counts` (may be null); empty segments yield 0
void segment_mean(std::int64_t n_in, std::int64_t n_seg, std::int64_t cols,
                  const float* a, const std::int32_t* seg, float* out,
                  std::int32_t* counts);

namespace serial {
void matmul(std::int64_t m, std::int64_t n, std::int64_t k, const float* a,
            const float* b, float* c);
void add(std::int64_t n, const float* a, const float* b, float* out);
void mul(std::int64_t n, const float* a, const float* b, float* out);
void relu(std::int64_t n, const float* a, float* out);
void segment_sum(std::int64_t n_in, std::int64_t n_seg, std::int64_t cols,
                 const float* a, const std::int32_t* seg, float* out);
}  // namespace serial

}  // namespace emuproto::kernels
