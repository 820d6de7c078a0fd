#pragma once

#include <cstddef>
#include <cstdint>

// Dense float kernels behind the tensor ops. Every kernel assigns each output
// element to exactly one iteration and accumulates within an element in a
// fixed serial order, so results are bit-identical for any thread count.
// lamassu::kernels::serial holds the plain reference implementations; the
// top-level entry points dispatch to OpenMP variants above a fixed size
// threshold when parallelism is enabled.

namespace lamassu::kernels {

void set_parallel(bool enabled);
bool parallel_enabled();

namespace detail {

// Row-range workers shared by the serial and OpenMP entry points, so both
// execute the same compiled code per output element.
void gemm_rows(bool tb, std::size_t r0, std::size_t r1, std::size_t n,
               std::size_t k, const float* a, const float* b, float* c,
               bool accumulate);
void gemm_row_ta(bool tb, std::size_t i, std::size_t m, std::size_t n,
                 std::size_t k, const float* a, const float* b, float* c,
                 bool accumulate);

}  // namespace detail

namespace serial {

// c[m x n] (+)= opA(a) * opB(b); a is [k x m] when ta, else [m x k];
// b is [n x k] when tb, else [k x n].
void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k,
          const float* a, const float* b, float* c, bool accumulate);

void add_bias_rows(float* y, const float* bias, std::size_t rows, std::size_t cols);
void col_sum_accum(const float* x, float* out, std::size_t rows, std::size_t cols);

void softmax_rows(const float* x, float* y, std::size_t rows, std::size_t cols);
// allowed is a [rows x cols] byte mask; masked entries get exactly 0.
void masked_softmax_rows(const float* x, const std::uint8_t* allowed, float* y,
                         std::size_t rows, std::size_t cols);

void layer_norm_rows(const float* x, const float* gamma, const float* beta,
                     float eps, float* y, float* save_mean, float* save_rstd,
                     std::size_t rows, std::size_t cols);

void map_tanh(const float* x, float* y, std::size_t n);
void map_sigmoid(const float* x, float* y, std::size_t n);
void map_relu(const float* x, float* y, std::size_t n);
void zip_add(const float* a, const float* b, float* y, std::size_t n);
void zip_sub(const float* a, const float* b, float* y, std::size_t n);
void zip_mul(const float* a, const float* b, float* y, std::size_t n);
void scale(const float* x, float alpha, float* y, std::size_t n);
// y += alpha * x
void axpy(float alpha, const float* x, float* y, std::size_t n);

void adam_step(float* param, float* m, float* v, const float* grad,
               std::size_t n, float lr, float beta1, float beta2, float eps,
               double bias_corr1, double bias_corr2);

}  // namespace serial

void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k,
          const float* a, const float* b, float* c, bool accumulate);
void add_bias_rows(float* y, const float* bias, std::size_t rows, std::size_t cols);
void col_sum_accum(const float* x, float* out, std::size_t rows, std::size_t cols);
void softmax_rows(const float* x, float* y, std::size_t rows, std::size_t cols);
void masked_softmax_rows(const float* x, const std::uint8_t* allowed, float* y,
                         std::size_t rows, std::size_t cols);
void layer_norm_rows(const float* x, const float* gamma, const float* beta,
                     float eps, float* y, float* save_mean, float* save_rstd,
                     std::size_t rows, std::size_t cols);
void map_tanh(const float* x, float* y, std::size_t n);
void map_sigmoid(const float* x, float* y, std::size_t n);
void map_relu(const float* x, float* y, std::size_t n);
void zip_add(const float* a, const float* b, float* y, std::size_t n);
void zip_sub(const float* a, const float* b, float* y, std::size_t n);
void zip_mul(const float* a, const float* b, float* y, std::size_t n);
void scale(const float* x, float alpha, float* y, std::size_t n);
void axpy(float alpha, const float* x, float* y, std::size_t n);
void adam_step(float* param, float* m, float* v, const float* grad,
               std::size_t n, float lr, float beta1, float beta2, float eps,
               double bias_corr1, double bias_corr2);

}  // namespace lamassu::kernels
