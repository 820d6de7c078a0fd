#include "lamassu/kernels.hpp"

#include <cmath>

// Reference implementations. The OpenMP variants in kernels.cpp must produce
// bit-identical output; tests compare the two on random inputs.

namespace lamassu::kernels {

namespace detail {

void gemm_rows(bool tb, std::size_t r0, std::size_t r1, std::size_t n,
               std::size_t k, const float* a, const float* b, float* c,
               bool accumulate) {
  for (std::size_t i = r0; i < r1; ++i) {
    const float* ar = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      float acc = accumulate ? c[i * n + j] : 0.0f;
      if (tb) {
        const float* br = b + j * k;
        for (std::size_t p = 0; p < k; ++p) acc += ar[p] * br[p];
      } else {
        for (std::size_t p = 0; p < k; ++p) acc += ar[p] * b[p * n + j];
      }
      c[i * n + j] = acc;
    }
  }
}

void gemm_row_ta(bool tb, std::size_t i, std::size_t m, std::size_t n,
                 std::size_t k, const float* a, const float* b, float* c,
                 bool accumulate) {
  for (std::size_t j = 0; j < n; ++j) {
    float acc = accumulate ? c[i * n + j] : 0.0f;
    for (std::size_t p = 0; p < k; ++p) {
      const float bv = tb ? b[j * k + p] : b[p * n + j];
      acc += a[p * m + i] * bv;
    }
    c[i * n + j] = acc;
  }
}

}  // namespace detail

namespace serial {

void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k,
          const float* a, const float* b, float* c, bool accumulate) {
  if (!ta) {
    detail::gemm_rows(tb, 0, m, n, k, a, b, c, accumulate);
  } else {
    for (std::size_t i = 0; i < m; ++i)
      detail::gemm_row_ta(tb, i, m, n, k, a, b, c, accumulate);
  }
}

void add_bias_rows(float* y, const float* bias, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] += bias[c];
}

void col_sum_accum(const float* x, float* out, std::size_t rows, std::size_t cols) {
  for (std::size_t c = 0; c < cols; ++c) {
    float acc = out[c];
    for (std::size_t r = 0; r < rows; ++r) acc += x[r * cols + c];
    out[c] = acc;
  }
}

void softmax_rows(const float* x, float* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const float* xr = x + r * cols;
    float* yr = y + r * cols;
    float mx = xr[0];
    for (std::size_t c = 1; c < cols; ++c) mx = xr[c] > mx ? xr[c] : mx;
    double denom = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      yr[c] = std::exp(xr[c] - mx);
      denom += yr[c];
    }
    const float inv = static_cast<float>(1.0 / denom);
    for (std::size_t c = 0; c < cols; ++c) yr[c] *= inv;
  }
}

void masked_softmax_rows(const float* x, const std::uint8_t* allowed, float* y,
                         std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const float* xr = x + r * cols;
    const std::uint8_t* ar = allowed + r * cols;
    float* yr = y + r * cols;
    float mx = 0.0f;
    bool any = false;
    for (std::size_t c = 0; c < cols; ++c) {
      if (!ar[c]) continue;
      if (!any || xr[c] > mx) mx = xr[c];
      any = true;
    }
    double denom = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (ar[c]) {
        yr[c] = std::exp(xr[c] - mx);
        denom += yr[c];
      } else {
        yr[c] = 0.0f;
      }
    }
    if (!any) continue;  // fully masked row stays all-zero
    const float inv = static_cast<float>(1.0 / denom);
    for (std::size_t c = 0; c < cols; ++c) yr[c] *= inv;
  }
}

void layer_norm_rows(const float* x, const float* gamma, const float* beta,
                     float eps, float* y, float* save_mean, float* save_rstd,
                     std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const float* xr = x + r * cols;
    float* yr = y + r * cols;
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) sum += xr[c];
    const float mean = static_cast<float>(sum / static_cast<double>(cols));
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = static_cast<double>(xr[c]) - mean;
      var += d * d;
    }
    const float rstd =
        static_cast<float>(1.0 / std::sqrt(var / static_cast<double>(cols) + eps));
    for (std::size_t c = 0; c < cols; ++c)
      yr[c] = (xr[c] - mean) * rstd * gamma[c] + beta[c];
    if (save_mean) save_mean[r] = mean;
    if (save_rstd) save_rstd[r] = rstd;
  }
}

void map_tanh(const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

void map_sigmoid(const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = 1.0f / (1.0f + std::exp(-x[i]));
}

void map_relu(const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void zip_add(const float* a, const float* b, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

void zip_sub(const float* a, const float* b, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] - b[i];
}

void zip_mul(const float* a, const float* b, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

void scale(const float* x, float alpha, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] * alpha;
}

void axpy(float alpha, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void adam_step(float* param, float* m, float* v, const float* grad,
               std::size_t n, float lr, float beta1, float beta2, float eps,
               double bias_corr1, double bias_corr2) {
  for (std::size_t i = 0; i < n; ++i) {
    const float g = grad[i];
    m[i] = beta1 * m[i] + (1.0f - beta1) * g;
    v[i] = beta2 * v[i] + (1.0f - beta2) * g * g;
    const float mhat = static_cast<float>(m[i] / bias_corr1);
    const float vhat = static_cast<float>(v[i] / bias_corr2);
    param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace serial

}  // namespace lamassu::kernels
