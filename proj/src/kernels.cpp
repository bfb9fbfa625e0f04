#include "emuproto/kernels.hpp"

#include <cblas.h>

#include <cstring>
#include <vector>

namespace emuproto::kernels {

namespace {
// BLAS is pinned to one thread; run-level parallelism lives in the
// experiment orchestrator and must not change numeric results.
struct BlasInit {
  BlasInit() { openblas_set_num_threads(1); }
};
const BlasInit blas_init;

constexpr std::int64_t kParallelCutoff = 1 << 14;
}  // namespace

void matmul(std::int64_t m, std::int64_t n, std::int64_t k, const float* a,
            const float* b, float* c) {
  cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, int(m), int(n),
              int(k), 1.0f, a, int(k), b, int(n), 0.0f, c, int(n));
}

void matmul_nt_acc(std::int64_t m, std::int64_t n, std::int64_t k,
                   const float* a, const float* b, float* c) {
  cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, int(m), int(n), int(k),
              1.0f, a, int(k), b, int(k), 1.0f, c, int(n));
}

void matmul_tn_acc(std::int64_t m, std::int64_t n, std::int64_t k,
                   const float* a, const float* b, float* c) {
  cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, int(m), int(n), int(k),
              1.0f, a, int(m), b, int(n), 1.0f, c, int(n));
}

void add(std::int64_t n, const float* a, const float* b, float* out) {
#pragma omp parallel for schedule(static) if (n > kParallelCutoff)
  for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(std::int64_t n, const float* a, const float* b, float* out) {
#pragma omp parallel for schedule(static) if (n > kParallelCutoff)
  for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul(std::int64_t n, const float* a, const float* b, float* out) {
#pragma omp parallel for schedule(static) if (n > kParallelCutoff)
  for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale(std::int64_t n, const float* a, float s, float* out) {
#pragma omp parallel for schedule(static) if (n > kParallelCutoff)
  for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] * s;
}

void relu(std::int64_t n, const float* a, float* out) {
#pragma omp parallel for schedule(static) if (n > kParallelCutoff)
  for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] > 0.0f ? a[i] : 0.0f;
}

void relu_grad_acc(std::int64_t n, const float* a, const float* g,
                   float* out) {
#pragma omp parallel for schedule(static) if (n > kParallelCutoff)
  for (std::int64_t i = 0; i < n; ++i) {
    if (a[i] > 0.0f) out[i] += g[i];
  }
}

void axpy(std::int64_t n, float alpha, const float* x, float* y) {
#pragma omp parallel for schedule(static) if (n > kParallelCutoff)
  for (std::int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void bias_add(std::int64_t rows, std::int64_t cols, const float* a,
              const float* bias, float* out) {
#pragma omp parallel for schedule(static) if (rows * cols > kParallelCutoff)
  for (std::int64_t r = 0; r < rows; ++r) {
    const float* src = a + r * cols;
    float* dst = out + r * cols;
    for (std::int64_t c = 0; c < cols; ++c) dst[c] = src[c] + bias[c];
  }
}

void gather_rows(std::int64_t n_idx, std::int64_t cols, const float* a,
                 const std::int32_t* idx, float* out) {
#pragma omp parallel for schedule(static) if (n_idx * cols > kParallelCutoff)
  for (std::int64_t i = 0; i < n_idx; ++i)
    std::memcpy(out + i * cols, a + std::int64_t(idx[i]) * cols,
                std::size_t(cols) * sizeof(float));
}

void scatter_rows_acc(std::int64_t n_idx, std::int64_t n_out,
                      std::int64_t cols, const float* a,
                      const std::int32_t* idx, float* out) {
  // Single pass in index order: deterministic regardless of thread count.
  (void)n_out;
  for (std::int64_t i = 0; i < n_idx; ++i) {
    float* dst = out + std::int64_t(idx[i]) * cols;
    const float* src = a + i * cols;
    for (std::int64_t c = 0; c < cols; ++c) dst[c] += src[c];
  }
}

void segment_sum(std::int64_t n_in, std::int64_t n_seg, std::int64_t cols,
                 const float* a, const std::int32_t* seg, float* out) {
  std::memset(out, 0, std::size_t(n_seg * cols) * sizeof(float));
  for (std::int64_t i = 0; i < n_in; ++i) {
    float* dst = out + std::int64_t(seg[i]) * cols;
    const float* src = a + i * cols;
    for (std::int64_t c = 0; c < cols; ++c) dst[c] += src[c];
  }
}

void segment_mean(std::int64_t n_in, std::int64_t n_seg, std::int64_t cols,
                  const float* a, const std::int32_t* seg, float* out,
                  std::int32_t* counts) {
  segment_sum(n_in, n_seg, cols, a, seg, out);
  std::vector<std::int32_t> local;
  std::int32_t* cnt = counts;
  if (!cnt) {
    local.assign(std::size_t(n_seg), 0);
    cnt = local.data();
  } else {
    std::memset(cnt, 0, std::size_t(n_seg) * sizeof(std::int32_t));
  }
  for (std::int64_t i = 0; i < n_in; ++i) cnt[seg[i]]++;
#pragma omp parallel for schedule(static) if (n_seg * cols > kParallelCutoff)
  for (std::int64_t s = 0; s < n_seg; ++s) {
    if (cnt[s] == 0) continue;
    const float inv = 1.0f / float(cnt[s]);
    float* dst = out + s * cols;
    for (std::int64_t c = 0; c < cols; ++c) dst[c] *= inv;
  }
}

namespace serial {

void matmul(std::int64_t m, std::int64_t n, std::int64_t k, const float* a,
            const float* b, float* c) {
  for (std::int64_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    for (std::int64_t j = 0; j < n; ++j) crow[j] = 0.0f;
    for (std::int64_t p = 0; p < k; ++p) {
      const float av = a[i * k + p];
      const float* brow = b + p * n;
      for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void add(std::int64_t n, const float* a, const float* b, float* out) {
  for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void mul(std::int64_t n, const float* a, const float* b, float* out) {
  for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void relu(std::int64_t n, const float* a, float* out) {
  for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] > 0.0f ? a[i] : 0.0f;
}

void segment_sum(std::int64_t n_in, std::int64_t n_seg, std::int64_t cols,
                 const float* a, const std::int32_t* seg, float* out) {
  kernels::segment_sum(n_in, n_seg, cols, a, seg, out);
}

}  // namespace serial

}  // namespace emuproto::kernels
