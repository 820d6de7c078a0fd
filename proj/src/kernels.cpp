#include "lamassu/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lamassu::kernels {

namespace {

std::atomic<bool> g_parallel{true};

// Work thresholds below which the OpenMP fork is not worth it. Fixed
// constants, so dispatch does not depend on load or thread count.
constexpr std::size_t kGemmFlopThreshold = 16384;
constexpr std::size_t kRowThreshold = 8;
constexpr std::size_t kMapThreshold = 16384;

bool use_parallel(std::size_t work, std::size_t threshold) {
#ifdef _OPENMP
  return g_parallel.load(std::memory_order_relaxed) && work >= threshold &&
         !omp_in_parallel();
#else
  (void)work;
  (void)threshold;
  return false;
#endif
}

}  // namespace

void set_parallel(bool enabled) { g_parallel.store(enabled, std::memory_order_relaxed); }
bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }

void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k,
          const float* a, const float* b, float* c, bool accumulate) {
  if (!use_parallel(m * n * k, kGemmFlopThreshold)) {
    serial::gemm(ta, tb, m, n, k, a, b, c, accumulate);
    return;
  }
#ifdef _OPENMP
  if (!ta) {
#pragma omp parallel
    {
      const int nth = omp_get_num_threads();
      const int tid = omp_get_thread_num();
      const std::size_t chunk = (m + nth - 1) / nth;
      const std::size_t r0 = std::min(m, chunk * std::size_t(tid));
      const std::size_t r1 = std::min(m, r0 + chunk);
      if (r0 < r1) detail::gemm_rows(tb, r0, r1, n, k, a, b, c, accumulate);
    }
  } else {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(m); ++i)
      detail::gemm_row_ta(tb, static_cast<std::size_t>(i), m, n, k, a, b, c, accumulate);
  }
#endif
}

void add_bias_rows(float* y, const float* bias, std::size_t rows, std::size_t cols) {
  serial::add_bias_rows(y, bias, rows, cols);
}

void col_sum_accum(const float* x, float* out, std::size_t rows, std::size_t cols) {
  serial::col_sum_accum(x, out, rows, cols);
}

void softmax_rows(const float* x, float* y, std::size_t rows, std::size_t cols) {
  if (!use_parallel(rows, kRowThreshold)) {
    serial::softmax_rows(x, y, rows, cols);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (long long r = 0; r < static_cast<long long>(rows); ++r)
    serial::softmax_rows(x + r * cols, y + r * cols, 1, cols);
#endif
}

void masked_softmax_rows(const float* x, const std::uint8_t* allowed, float* y,
                         std::size_t rows, std::size_t cols) {
  if (!use_parallel(rows, kRowThreshold)) {
    serial::masked_softmax_rows(x, allowed, y, rows, cols);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (long long r = 0; r < static_cast<long long>(rows); ++r)
    serial::masked_softmax_rows(x + r * cols, allowed + r * cols, y + r * cols, 1, cols);
#endif
}

void layer_norm_rows(const float* x, const float* gamma, const float* beta,
                     float eps, float* y, float* save_mean, float* save_rstd,
                     std::size_t rows, std::size_t cols) {
  if (!use_parallel(rows, kRowThreshold)) {
    serial::layer_norm_rows(x, gamma, beta, eps, y, save_mean, save_rstd, rows, cols);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (long long r = 0; r < static_cast<long long>(rows); ++r)
    serial::layer_norm_rows(x + r * cols, gamma, beta, eps, y + r * cols,
                            save_mean ? save_mean + r : nullptr,
                            save_rstd ? save_rstd + r : nullptr, 1, cols);
#endif
}

#define LAMASSU_MAP_KERNEL(NAME)                                     \
  void NAME(const float* x, float* y, std::size_t n) {               \
    if (!use_parallel(n, kMapThreshold)) {                           \
      serial::NAME(x, y, n);                                         \
      return;                                                        \
    }                                                                \
    _Pragma("omp parallel for schedule(static)")                     \
    for (long long i = 0; i < static_cast<long long>(n); ++i)        \
      serial::NAME(x + i, y + i, 1);                                 \
  }

#ifdef _OPENMP
LAMASSU_MAP_KERNEL(map_tanh)
LAMASSU_MAP_KERNEL(map_sigmoid)
LAMASSU_MAP_KERNEL(map_relu)
#else
void map_tanh(const float* x, float* y, std::size_t n) { serial::map_tanh(x, y, n); }
void map_sigmoid(const float* x, float* y, std::size_t n) { serial::map_sigmoid(x, y, n); }
void map_relu(const float* x, float* y, std::size_t n) { serial::map_relu(x, y, n); }
#endif

#undef LAMASSU_MAP_KERNEL

void zip_add(const float* a, const float* b, float* y, std::size_t n) {
  serial::zip_add(a, b, y, n);
}
void zip_sub(const float* a, const float* b, float* y, std::size_t n) {
  serial::zip_sub(a, b, y, n);
}
void zip_mul(const float* a, const float* b, float* y, std::size_t n) {
  serial::zip_mul(a, b, y, n);
}
void scale(const float* x, float alpha, float* y, std::size_t n) {
  serial::scale(x, alpha, y, n);
}
void axpy(float alpha, const float* x, float* y, std::size_t n) {
  serial::axpy(alpha, x, y, n);
}

void adam_step(float* param, float* m, float* v, const float* grad,
               std::size_t n, float lr, float beta1, float beta2, float eps,
               double bias_corr1, double bias_corr2) {
  if (!use_parallel(n, kMapThreshold)) {
    serial::adam_step(param, m, v, grad, n, lr, beta1, beta2, eps, bias_corr1,
                      bias_corr2);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    serial::adam_step(param + i, m + i, v + i, grad + i, 1, lr, beta1, beta2,
                      eps, bias_corr1, bias_corr2);
#endif
}

}  // namespace lamassu::kernels
