#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "lamassu/rng.hpp"

namespace lamassu {

using Shape = std::vector<std::size_t>;

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<float> data;
  bool requires_grad = false;
  std::vector<float> grad;  // sized lazily during backward
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(TensorImpl&)> backward_fn;

  std::size_t numel() const { return data.size(); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0f);
  }
};

}  // namespace detail

// Graph recording can be switched off (decode / evaluation paths); ops then
// compute forward values only.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Dense row-major float32 tensor with reverse-mode autodiff. Copying a
// Tensor copies the handle; the buffer and graph node are shared. Values are
// treated as immutable once an op has produced them; only optimizer updates
// write into parameter buffers, outside any recorded graph.
class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<float> values, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);
  static Tensor randn(Shape shape, Rng& rng, float stddev, bool requires_grad = false);
  static Tensor uniform(Shape shape, Rng& rng, float lo, float hi, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t i) const { return shape().at(i); }
  std::size_t numel() const;

  float* data();
  const float* data() const;
  float item() const;  // scalar tensors only

  bool requires_grad() const;
  bool has_grad() const;
  float* grad();
  const float* grad() const;
  void zero_grad();

  // Runs reverse-mode accumulation from this scalar. Visits nodes in exact
  // reverse topological order; gradients add at fan-out.
  void backward();

  // Debug-mode finiteness check; throws std::runtime_error when the tensor
  // holds NaN/Inf and checks are enabled. No-op otherwise.
  void check_finite(const char* what) const;

  std::shared_ptr<detail::TensorImpl> impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

// Global switch for NaN/Inf checks on op outputs (off by default; the hot
// path stays clean).
void set_debug_checks(bool enabled);
bool debug_checks_enabled();

std::string shape_to_string(const Shape& shape);

// ---- ops ------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
// a[m x k] * b[n x k]^T -> [m x n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// y[r x out] = x[r x in] * w[out x in]^T + b[out]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float alpha);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);

// Softmax over the trailing axis (1-D or 2-D input), max-subtracted.
Tensor softmax(const Tensor& a);
Tensor log_softmax(const Tensor& a);
// Rows with allowed[r*cols+c] == 0 receive exactly zero output.
Tensor masked_softmax(const Tensor& a, std::vector<std::uint8_t> allowed);
// -log softmax(logits)[target] for a 1-D logits vector.
Tensor cross_entropy(const Tensor& logits, std::size_t target);

Tensor sum(const Tensor& a);                      // all elements, 64-bit accumulation
Tensor mean_rows(const Tensor& a);                // [r x c] -> [c]
Tensor mean_scalars(const std::vector<Tensor>& xs);

Tensor reshape(const Tensor& a, Shape shape);
Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1);
Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t r1);
Tensor concat_cols(const std::vector<Tensor>& xs);
Tensor concat_rows(const std::vector<Tensor>& xs);

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);
// out[(i*rows_b + j), :] = a[i, :] + b[j, :]
Tensor pairwise_sum(const Tensor& a, const Tensor& b);
// out[r, :] = x[r, :] * s[r]; s is [r] or [r x 1]
Tensor scale_rows(const Tensor& x, const Tensor& s);

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps);
// Inverted dropout; identity when p == 0. Caller decides train/eval.
Tensor dropout(const Tensor& x, float p, Rng& rng);

}  // namespace lamassu
