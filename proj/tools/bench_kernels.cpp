// Throughput comparison of the fast kernel path (BLAS + OpenMP) against the
// serial reference loops. Usage: bench_kernels [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "emuproto/kernels.hpp"
#include "emuproto/rng.hpp"

using Clock = std::chrono::steady_clock;

static double seconds(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 50;
  emuproto::Rng rng(0);

  // edge-MLP shaped gemm: many rows, narrow K/N
  const std::int64_t m = 16384, k = 64, n = 32;
  std::vector<float> a(m * k), b(k * n), c(m * n);
  for (auto& v : a) v = float(rng.uniform(-1.0, 1.0));
  for (auto& v : b) v = float(rng.uniform(-1.0, 1.0));

  auto t0 = Clock::now();
  for (int r = 0; r < repeats; ++r)
    emuproto::kernels::matmul(m, n, k, a.data(), b.data(), c.data());
  auto t1 = Clock::now();
  for (int r = 0; r < repeats; ++r)
    emuproto::kernels::serial::matmul(m, n, k, a.data(), b.data(), c.data());
  auto t2 = Clock::now();
  const double flops = 2.0 * double(m) * double(k) * double(n) * repeats;
  std::printf("matmul %lldx%lldx%lld   fast %7.2f GFLOP/s   serial %7.2f GFLOP/s\n",
              (long long)m, (long long)k, (long long)n,
              flops / seconds(t0, t1) / 1e9, flops / seconds(t1, t2) / 1e9);

  const std::int64_t ne = 1 << 22;
  std::vector<float> x(ne), y(ne), out(ne);
  for (auto& v : x) v = float(rng.uniform(-1.0, 1.0));
  for (auto& v : y) v = float(rng.uniform(-1.0, 1.0));
  t0 = Clock::now();
  for (int r = 0; r < repeats; ++r)
    emuproto::kernels::add(ne, x.data(), y.data(), out.data());
  t1 = Clock::now();
  for (int r = 0; r < repeats; ++r)
    emuproto::kernels::serial::add(ne, x.data(), y.data(), out.data());
  t2 = Clock::now();
  std::printf("add    n=%lld        parallel %6.2f GB/s     serial %6.2f GB/s\n",
              (long long)ne, 12.0 * ne * repeats / seconds(t0, t1) / 1e9,
              12.0 * ne * repeats / seconds(t1, t2) / 1e9);

  std::vector<std::int32_t> seg(ne / 32);
  std::vector<float> sv(ne / 32 * 8), so(1024 * 8);
  for (std::size_t i = 0; i < seg.size(); ++i)
    seg[i] = std::int32_t(rng.uniform_index(1024));
  for (auto& v : sv) v = float(rng.uniform(-1.0, 1.0));
  t0 = Clock::now();
  for (int r = 0; r < repeats; ++r)
    emuproto::kernels::segment_sum(ne / 32, 1024, 8, sv.data(), seg.data(),
                                   so.data());
  t1 = Clock::now();
  for (int r = 0; r < repeats; ++r)
    emuproto::kernels::serial::segment_sum(ne / 32, 1024, 8, sv.data(),
                                           seg.data(), so.data());
  t2 = Clock::now();
  std::printf("segsum n=%lld rows     fast %8.3f s        serial %8.3f s\n",
              (long long)(ne / 32), seconds(t0, t1), seconds(t1, t2));
  return 0;
}
