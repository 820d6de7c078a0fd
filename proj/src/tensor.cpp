#include "lamassu/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "lamassu/kernels.hpp"

namespace lamassu {

namespace {

thread_local bool g_grad_enabled = true;
bool g_debug_checks = false;

using ImplPtr = std::shared_ptr<detail::TensorImpl>;

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto e : s) n *= e;
  return n;
}

ImplPtr make_impl(Shape shape, bool requires_grad = false) {
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->data.assign(shape_numel(shape), 0.0f);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return impl;
}

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

void require_defined(const Tensor& t, const char* what) {
  if (!t.defined()) fail(std::string(what) + ": undefined tensor");
}

// rows x cols view of a 1-D or 2-D tensor (1-D treated as a single row).
std::pair<std::size_t, std::size_t> as_rows_cols(const Tensor& t, const char* what) {
  if (t.rank() == 1) return {1, t.dim(0)};
  if (t.rank() == 2) return {t.dim(0), t.dim(1)};
  fail(std::string(what) + ": expected rank 1 or 2, got shape " +
       shape_to_string(t.shape()));
}

bool any_requires_grad(std::initializer_list<const Tensor*> ts) {
  for (const Tensor* t : ts)
    if (t->defined() && t->requires_grad()) return true;
  return false;
}

// Attaches the graph edge when recording is on and some input needs grads.
void attach(const ImplPtr& out, std::vector<ImplPtr> parents,
            std::function<void(detail::TensorImpl&)> fn) {
  out->requires_grad = true;
  out->parents = std::move(parents);
  out->backward_fn = std::move(fn);
}

void maybe_check(const Tensor& t, const char* what) {
  if (g_debug_checks) t.check_finite(what);
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void set_debug_checks(bool enabled) { g_debug_checks = enabled; }
bool debug_checks_enabled() { return g_debug_checks; }

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

// ---- Tensor ----------------------------------------------------------------

Tensor Tensor::from(Shape shape, std::vector<float> values, bool requires_grad) {
  require(shape_numel(shape) == values.size(),
          "Tensor::from: shape " + shape_to_string(shape) + " does not match " +
              std::to_string(values.size()) + " values");
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(impl);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(make_impl(std::move(shape), requires_grad));
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  auto impl = make_impl(std::move(shape), requires_grad);
  std::fill(impl->data.begin(), impl->data.end(), value);
  return Tensor(impl);
}

Tensor Tensor::scalar(float value, bool requires_grad) {
  return full({1}, value, requires_grad);
}

Tensor Tensor::randn(Shape shape, Rng& rng, float stddev, bool requires_grad) {
  auto impl = make_impl(std::move(shape), requires_grad);
  for (auto& v : impl->data) v = rng.gaussian() * stddev;
  return Tensor(impl);
}

Tensor Tensor::uniform(Shape shape, Rng& rng, float lo, float hi, bool requires_grad) {
  auto impl = make_impl(std::move(shape), requires_grad);
  for (auto& v : impl->data) v = rng.uniform_range(lo, hi);
  return Tensor(impl);
}

const Shape& Tensor::shape() const {
  require_defined(*this, "shape");
  return impl_->shape;
}

std::size_t Tensor::numel() const {
  require_defined(*this, "numel");
  return impl_->numel();
}

float* Tensor::data() {
  require_defined(*this, "data");
  return impl_->data.data();
}

const float* Tensor::data() const {
  require_defined(*this, "data");
  return impl_->data.data();
}

float Tensor::item() const {
  require_defined(*this, "item");
  require(numel() == 1, "item: tensor has " + std::to_string(numel()) + " elements");
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return defined() && impl_->requires_grad; }

bool Tensor::has_grad() const {
  return defined() && impl_->grad.size() == impl_->data.size();
}

float* Tensor::grad() {
  require_defined(*this, "grad");
  require(has_grad(), "grad: no gradient present (run backward first)");
  return impl_->grad.data();
}

const float* Tensor::grad() const {
  return const_cast<Tensor*>(this)->grad();
}

void Tensor::zero_grad() {
  require_defined(*this, "zero_grad");
  impl_->grad.assign(impl_->data.size(), 0.0f);
}

void Tensor::backward() {
  require_defined(*this, "backward");
  require(numel() == 1,
          "backward: loss must be scalar, got shape " + shape_to_string(shape()));
  require(impl_->requires_grad, "backward: tensor does not require grad");

  // Iterative post-order DFS. Traversal follows the stored parent order, so
  // the resulting topological order is a pure function of the graph.
  std::vector<detail::TensorImpl*> topo;
  std::unordered_set<detail::TensorImpl*> visited;
  struct Frame {
    detail::TensorImpl* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({impl_.get(), 0});
  visited.insert(impl_.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      detail::TensorImpl* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      topo.push_back(f.node);
      stack.pop_back();
    }
  }

  impl_->ensure_grad();
  impl_->grad[0] += 1.0f;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    detail::TensorImpl* node = *it;
    if (node->backward_fn) node->backward_fn(*node);
  }
}

void Tensor::check_finite(const char* what) const {
  require_defined(*this, "check_finite");
  for (float v : impl_->data) {
    if (!std::isfinite(v))
      throw std::runtime_error(std::string(what) + ": non-finite value detected");
  }
}

// ---- ops -------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  require(a.rank() == 2 && b.rank() == 2,
          "matmul: expected rank-2 operands, got " + shape_to_string(a.shape()) +
              " and " + shape_to_string(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  require(b.dim(0) == k, "matmul: inner dimensions differ: " +
                             shape_to_string(a.shape()) + " vs " +
                             shape_to_string(b.shape()));
  auto out = make_impl({m, n});
  kernels::gemm(false, false, m, n, k, a.data(), b.data(), out->data.data(), false);
  if (g_grad_enabled && any_requires_grad({&a, &b})) {
    auto ai = a.impl(), bi = b.impl();
    attach(out, {ai, bi}, [ai, bi, m, n, k](detail::TensorImpl& self) {
      const float* dy = self.grad.data();
      if (ai->requires_grad) {
        ai->ensure_grad();  // dA = dY * B^T
        kernels::gemm(false, true, m, k, n, dy, bi->data.data(), ai->grad.data(), true);
      }
      if (bi->requires_grad) {
        bi->ensure_grad();  // dB = A^T * dY
        kernels::gemm(true, false, k, n, m, ai->data.data(), dy, bi->grad.data(), true);
      }
    });
  }
  Tensor t(out);
  maybe_check(t, "matmul");
  return t;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul_nt");
  require_defined(b, "matmul_nt");
  require(a.rank() == 2 && b.rank() == 2, "matmul_nt: expected rank-2 operands");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  require(b.dim(1) == k, "matmul_nt: inner dimensions differ: " +
                             shape_to_string(a.shape()) + " vs " +
                             shape_to_string(b.shape()));
  auto out = make_impl({m, n});
  kernels::gemm(false, true, m, n, k, a.data(), b.data(), out->data.data(), false);
  if (g_grad_enabled && any_requires_grad({&a, &b})) {
    auto ai = a.impl(), bi = b.impl();
    attach(out, {ai, bi}, [ai, bi, m, n, k](detail::TensorImpl& self) {
      const float* dy = self.grad.data();
      if (ai->requires_grad) {
        ai->ensure_grad();  // dA = dY * B
        kernels::gemm(false, false, m, k, n, dy, bi->data.data(), ai->grad.data(), true);
      }
      if (bi->requires_grad) {
        bi->ensure_grad();  // dB = dY^T * A
        kernels::gemm(true, false, n, k, m, dy, ai->data.data(), bi->grad.data(), true);
      }
    });
  }
  Tensor t(out);
  maybe_check(t, "matmul_nt");
  return t;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_defined(x, "linear");
  require_defined(w, "linear");
  require_defined(b, "linear");
  auto [rows, in] = as_rows_cols(x, "linear");
  require(w.rank() == 2, "linear: weight must be rank 2");
  const std::size_t out_dim = w.dim(0);
  require(w.dim(1) == in, "linear: input dim " + std::to_string(in) +
                              " does not match weight " + shape_to_string(w.shape()));
  require(b.rank() == 1 && b.dim(0) == out_dim, "linear: bias shape mismatch");
  Shape out_shape = x.rank() == 1 ? Shape{out_dim} : Shape{rows, out_dim};
  auto out = make_impl(std::move(out_shape));
  kernels::gemm(false, true, rows, out_dim, in, x.data(), w.data(), out->data.data(), false);
  kernels::add_bias_rows(out->data.data(), b.data(), rows, out_dim);
  if (g_grad_enabled && any_requires_grad({&x, &w, &b})) {
    auto xi = x.impl(), wi = w.impl(), bi = b.impl();
    attach(out, {xi, wi, bi}, [xi, wi, bi, rows, in, out_dim](detail::TensorImpl& self) {
      const float* dy = self.grad.data();
      if (xi->requires_grad) {
        xi->ensure_grad();  // dX = dY * W
        kernels::gemm(false, false, rows, in, out_dim, dy, wi->data.data(),
                      xi->grad.data(), true);
      }
      if (wi->requires_grad) {
        wi->ensure_grad();  // dW = dY^T * X
        kernels::gemm(true, false, out_dim, in, rows, dy, xi->data.data(),
                      wi->grad.data(), true);
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        kernels::col_sum_accum(dy, bi->grad.data(), rows, out_dim);
      }
    });
  }
  Tensor t(out);
  maybe_check(t, "linear");
  return t;
}

Tensor transpose(const Tensor& a) {
  require_defined(a, "transpose");
  require(a.rank() == 2, "transpose: expected rank 2");
  const std::size_t r = a.dim(0), c = a.dim(1);
  auto out = make_impl({c, r});
  const float* src = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out->data[j * r + i] = src[i * c + j];
  if (g_grad_enabled && a.requires_grad()) {
    auto ai = a.impl();
    attach(out, {ai}, [ai, r, c](detail::TensorImpl& self) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
          ai->grad[i * c + j] += self.grad[j * r + i];
    });
  }
  return Tensor(out);
}

namespace {

Tensor binary_pointwise(const Tensor& a, const Tensor& b, const char* name,
                        void (*fwd)(const float*, const float*, float*, std::size_t),
                        int mode /*0 add, 1 sub, 2 mul*/) {
  require_defined(a, name);
  require_defined(b, name);
  require(a.shape() == b.shape(), std::string(name) + ": shape mismatch " +
                                      shape_to_string(a.shape()) + " vs " +
                                      shape_to_string(b.shape()));
  auto out = make_impl(a.shape());
  const std::size_t n = a.numel();
  fwd(a.data(), b.data(), out->data.data(), n);
  if (g_grad_enabled && any_requires_grad({&a, &b})) {
    auto ai = a.impl(), bi = b.impl();
    attach(out, {ai, bi}, [ai, bi, n, mode](detail::TensorImpl& self) {
      const float* dy = self.grad.data();
      if (ai->requires_grad) {
        ai->ensure_grad();
        if (mode == 2)
          for (std::size_t i = 0; i < n; ++i) ai->grad[i] += dy[i] * bi->data[i];
        else
          kernels::axpy(1.0f, dy, ai->grad.data(), n);
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        if (mode == 2)
          for (std::size_t i = 0; i < n; ++i) bi->grad[i] += dy[i] * ai->data[i];
        else
          kernels::axpy(mode == 1 ? -1.0f : 1.0f, dy, bi->grad.data(), n);
      }
    });
  }
  Tensor t(out);
  maybe_check(t, name);
  return t;
}

Tensor unary_pointwise(const Tensor& a, const char* name,
                       void (*fwd)(const float*, float*, std::size_t),
                       int kind /*0 tanh, 1 sigmoid, 2 relu*/) {
  require_defined(a, name);
  auto out = make_impl(a.shape());
  const std::size_t n = a.numel();
  fwd(a.data(), out->data.data(), n);
  if (g_grad_enabled && a.requires_grad()) {
    auto ai = a.impl();
    attach(out, {ai}, [ai, n, kind](detail::TensorImpl& self) {
      ai->ensure_grad();
      const float* y = self.data.data();
      const float* dy = self.grad.data();
      for (std::size_t i = 0; i < n; ++i) {
        float d;
        switch (kind) {
          case 0: d = 1.0f - y[i] * y[i]; break;
          case 1: d = y[i] * (1.0f - y[i]); break;
          default: d = y[i] > 0.0f ? 1.0f : 0.0f; break;
        }
        ai->grad[i] += dy[i] * d;
      }
    });
  }
  Tensor t(out);
  maybe_check(t, name);
  return t;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_pointwise(a, b, "add", kernels::zip_add, 0);
}
Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_pointwise(a, b, "sub", kernels::zip_sub, 1);
}
Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_pointwise(a, b, "mul", kernels::zip_mul, 2);
}

Tensor scale(const Tensor& a, float alpha) {
  require_defined(a, "scale");
  auto out = make_impl(a.shape());
  const std::size_t n = a.numel();
  kernels::scale(a.data(), alpha, out->data.data(), n);
  if (g_grad_enabled && a.requires_grad()) {
    auto ai = a.impl();
    attach(out, {ai}, [ai, n, alpha](detail::TensorImpl& self) {
      ai->ensure_grad();
      kernels::axpy(alpha, self.grad.data(), ai->grad.data(), n);
    });
  }
  return Tensor(out);
}

Tensor tanh(const Tensor& a) { return unary_pointwise(a, "tanh", kernels::map_tanh, 0); }
Tensor sigmoid(const Tensor& a) {
  return unary_pointwise(a, "sigmoid", kernels::map_sigmoid, 1);
}
Tensor relu(const Tensor& a) { return unary_pointwise(a, "relu", kernels::map_relu, 2); }

Tensor softmax(const Tensor& a) {
  require_defined(a, "softmax");
  auto [rows, cols] = as_rows_cols(a, "softmax");
  require(cols >= 1, "softmax: empty axis");
  auto out = make_impl(a.shape());
  kernels::softmax_rows(a.data(), out->data.data(), rows, cols);
  if (g_grad_enabled && a.requires_grad()) {
    auto ai = a.impl();
    attach(out, {ai}, [ai, rows, cols](detail::TensorImpl& self) {
      ai->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const float* y = self.data.data() + r * cols;
        const float* dy = self.grad.data() + r * cols;
        float* dx = ai->grad.data() + r * cols;
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) dot += double(y[c]) * dy[c];
        for (std::size_t c = 0; c < cols; ++c)
          dx[c] += y[c] * (dy[c] - static_cast<float>(dot));
      }
    });
  }
  Tensor t(out);
  maybe_check(t, "softmax");
  return t;
}

Tensor log_softmax(const Tensor& a) {
  require_defined(a, "log_softmax");
  auto [rows, cols] = as_rows_cols(a, "log_softmax");
  require(cols >= 1, "log_softmax: empty axis");
  auto out = make_impl(a.shape());
  const float* x = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const float* xr = x + r * cols;
    float* yr = out->data.data() + r * cols;
    float mx = xr[0];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, xr[c]);
    double denom = 0.0;
    for (std::size_t c = 0; c < cols; ++c) denom += std::exp(double(xr[c]) - mx);
    const double lse = mx + std::log(denom);
    for (std::size_t c = 0; c < cols; ++c)
      yr[c] = static_cast<float>(double(xr[c]) - lse);
  }
  if (g_grad_enabled && a.requires_grad()) {
    auto ai = a.impl();
    attach(out, {ai}, [ai, rows, cols](detail::TensorImpl& self) {
      ai->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const float* y = self.data.data() + r * cols;
        const float* dy = self.grad.data() + r * cols;
        float* dx = ai->grad.data() + r * cols;
        double total = 0.0;
        for (std::size_t c = 0; c < cols; ++c) total += dy[c];
        for (std::size_t c = 0; c < cols; ++c)
          dx[c] += dy[c] - static_cast<float>(std::exp(double(y[c])) * total);
      }
    });
  }
  return Tensor(out);
}

Tensor masked_softmax(const Tensor& a, std::vector<std::uint8_t> allowed) {
  require_defined(a, "masked_softmax");
  auto [rows, cols] = as_rows_cols(a, "masked_softmax");
  require(allowed.size() == rows * cols, "masked_softmax: mask size mismatch");
  auto out = make_impl(a.shape());
  kernels::masked_softmax_rows(a.data(), allowed.data(), out->data.data(), rows, cols);
  if (g_grad_enabled && a.requires_grad()) {
    auto ai = a.impl();
    attach(out, {ai}, [ai, rows, cols](detail::TensorImpl& self) {
      // Masked outputs are exactly zero, so the plain softmax jacobian
      // already routes no gradient through them.
      ai->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const float* y = self.data.data() + r * cols;
        const float* dy = self.grad.data() + r * cols;
        float* dx = ai->grad.data() + r * cols;
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) dot += double(y[c]) * dy[c];
        for (std::size_t c = 0; c < cols; ++c)
          dx[c] += y[c] * (dy[c] - static_cast<float>(dot));
      }
    });
  }
  Tensor t(out);
  maybe_check(t, "masked_softmax");
  return t;
}

Tensor cross_entropy(const Tensor& logits, std::size_t target) {
  require_defined(logits, "cross_entropy");
  require(logits.rank() == 1, "cross_entropy: expected 1-D logits");
  const std::size_t n = logits.dim(0);
  require(n >= 1, "cross_entropy: empty logits");
  require(target < n, "cross_entropy: target " + std::to_string(target) +
                          " out of range for " + std::to_string(n) + " classes");
  const float* x = logits.data();
  double mx = x[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, double(x[i]));
  double denom = 0.0;
  for (std::size_t i = 0; i < n; ++i) denom += std::exp(double(x[i]) - mx);
  const double lse = mx + std::log(denom);
  auto out = make_impl({1});
  out->data[0] = static_cast<float>(lse - double(x[target]));
  if (g_grad_enabled && logits.requires_grad()) {
    auto li = logits.impl();
    attach(out, {li}, [li, n, target, mx, lse](detail::TensorImpl& self) {
      li->ensure_grad();
      const float dy = self.grad[0];
      for (std::size_t i = 0; i < n; ++i) {
        const double p = std::exp(double(li->data[i]) - lse);
        float g = static_cast<float>(p);
        if (i == target) g -= 1.0f;
        li->grad[i] += dy * g;
      }
      (void)mx;
    });
  }
  return Tensor(out);
}

Tensor sum(const Tensor& a) {
  require_defined(a, "sum");
  double acc = 0.0;
  const float* x = a.data();
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  auto out = make_impl({1});
  out->data[0] = static_cast<float>(acc);
  if (g_grad_enabled && a.requires_grad()) {
    auto ai = a.impl();
    attach(out, {ai}, [ai, n](detail::TensorImpl& self) {
      ai->ensure_grad();
      const float dy = self.grad[0];
      for (std::size_t i = 0; i < n; ++i) ai->grad[i] += dy;
    });
  }
  return Tensor(out);
}

Tensor mean_rows(const Tensor& a) {
  require_defined(a, "mean_rows");
  require(a.rank() == 2, "mean_rows: expected rank 2");
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  require(rows >= 1, "mean_rows: empty input");
  auto out = make_impl({cols});
  const float* x = a.data();
  for (std::size_t c = 0; c < cols; ++c) {
    double acc = 0.0;
    for (std::size_t r = 0; r < rows; ++r) acc += x[r * cols + c];
    out->data[c] = static_cast<float>(acc / double(rows));
  }
  if (g_grad_enabled && a.requires_grad()) {
    auto ai = a.impl();
    attach(out, {ai}, [ai, rows, cols](detail::TensorImpl& self) {
      ai->ensure_grad();
      const float inv = 1.0f / static_cast<float>(rows);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
          ai->grad[r * cols + c] += self.grad[c] * inv;
    });
  }
  return Tensor(out);
}

Tensor mean_scalars(const std::vector<Tensor>& xs) {
  require(!xs.empty(), "mean_scalars: empty input");
  double acc = 0.0;
  bool rg = false;
  for (const Tensor& t : xs) {
    require_defined(t, "mean_scalars");
    require(t.numel() == 1, "mean_scalars: non-scalar element");
    acc += t.item();
    rg = rg || t.requires_grad();
  }
  auto out = make_impl({1});
  out->data[0] = static_cast<float>(acc / double(xs.size()));
  if (g_grad_enabled && rg) {
    std::vector<ImplPtr> parents;
    parents.reserve(xs.size());
    for (const Tensor& t : xs) parents.push_back(t.impl());
    const float inv = 1.0f / static_cast<float>(xs.size());
    auto ps = parents;
    attach(out, std::move(parents), [ps, inv](detail::TensorImpl& self) {
      for (const auto& p : ps) {
        if (!p->requires_grad) continue;
        p->ensure_grad();
        p->grad[0] += self.grad[0] * inv;
      }
    });
  }
  return Tensor(out);
}

Tensor reshape(const Tensor& a, Shape shape) {
  require_defined(a, "reshape");
  require(shape_numel(shape) == a.numel(),
          "reshape: cannot view " + shape_to_string(a.shape()) + " as " +
              shape_to_string(shape));
  auto out = make_impl(std::move(shape));
  out->data = a.impl()->data;
  if (g_grad_enabled && a.requires_grad()) {
    auto ai = a.impl();
    attach(out, {ai}, [ai](detail::TensorImpl& self) {
      ai->ensure_grad();
      kernels::axpy(1.0f, self.grad.data(), ai->grad.data(), self.grad.size());
    });
  }
  return Tensor(out);
}

Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1) {
  require_defined(a, "slice_cols");
  require(a.rank() == 2, "slice_cols: expected rank 2");
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  require(c0 < c1 && c1 <= cols, "slice_cols: bad range");
  const std::size_t w = c1 - c0;
  auto out = make_impl({rows, w});
  const float* x = a.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < w; ++c) out->data[r * w + c] = x[r * cols + c0 + c];
  if (g_grad_enabled && a.requires_grad()) {
    auto ai = a.impl();
    attach(out, {ai}, [ai, rows, cols, c0, w](detail::TensorImpl& self) {
      ai->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < w; ++c)
          ai->grad[r * cols + c0 + c] += self.grad[r * w + c];
    });
  }
  return Tensor(out);
}

Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t r1) {
  require_defined(a, "slice_rows");
  require(a.rank() == 2, "slice_rows: expected rank 2");
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  require(r0 < r1 && r1 <= rows, "slice_rows: bad range");
  const std::size_t h = r1 - r0;
  auto out = make_impl({h, cols});
  std::copy(a.data() + r0 * cols, a.data() + r1 * cols, out->data.begin());
  if (g_grad_enabled && a.requires_grad()) {
    auto ai = a.impl();
    attach(out, {ai}, [ai, cols, r0, h](detail::TensorImpl& self) {
      ai->ensure_grad();
      kernels::axpy(1.0f, self.grad.data(), ai->grad.data() + r0 * cols, h * cols);
    });
  }
  return Tensor(out);
}

Tensor concat_cols(const std::vector<Tensor>& xs) {
  require(!xs.empty(), "concat_cols: empty input");
  const std::size_t rows = xs[0].dim(0);
  std::size_t total = 0;
  bool rg = false;
  for (const Tensor& t : xs) {
    require(t.rank() == 2 && t.dim(0) == rows, "concat_cols: row mismatch");
    total += t.dim(1);
    rg = rg || t.requires_grad();
  }
  auto out = make_impl({rows, total});
  std::size_t off = 0;
  for (const Tensor& t : xs) {
    const std::size_t w = t.dim(1);
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(t.data() + r * w, t.data() + (r + 1) * w,
                out->data.begin() + r * total + off);
    off += w;
  }
  if (g_grad_enabled && rg) {
    std::vector<ImplPtr> parents;
    for (const Tensor& t : xs) parents.push_back(t.impl());
    auto ps = parents;
    attach(out, std::move(parents), [ps, rows, total](detail::TensorImpl& self) {
      std::size_t off2 = 0;
      for (const auto& p : ps) {
        const std::size_t w = p->shape[1];
        if (p->requires_grad) {
          p->ensure_grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < w; ++c)
              p->grad[r * w + c] += self.grad[r * total + off2 + c];
        }
        off2 += w;
      }
    });
  }
  return Tensor(out);
}

Tensor concat_rows(const std::vector<Tensor>& xs) {
  require(!xs.empty(), "concat_rows: empty input");
  const std::size_t cols = xs[0].dim(1);
  std::size_t total = 0;
  bool rg = false;
  for (const Tensor& t : xs) {
    require(t.rank() == 2 && t.dim(1) == cols, "concat_rows: column mismatch");
    total += t.dim(0);
    rg = rg || t.requires_grad();
  }
  auto out = make_impl({total, cols});
  std::size_t off = 0;
  for (const Tensor& t : xs) {
    std::copy(t.data(), t.data() + t.numel(), out->data.begin() + off);
    off += t.numel();
  }
  if (g_grad_enabled && rg) {
    std::vector<ImplPtr> parents;
    for (const Tensor& t : xs) parents.push_back(t.impl());
    auto ps = parents;
    attach(out, std::move(parents), [ps](detail::TensorImpl& self) {
      std::size_t off2 = 0;
      for (const auto& p : ps) {
        const std::size_t n = p->data.size();
        if (p->requires_grad) {
          p->ensure_grad();
          kernels::axpy(1.0f, self.grad.data() + off2, p->grad.data(), n);
        }
        off2 += n;
      }
    });
  }
  return Tensor(out);
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
  require_defined(table, "embedding_lookup");
  require(table.rank() == 2, "embedding_lookup: table must be rank 2");
  const std::size_t rows = table.dim(0), dim = table.dim(1);
  for (int id : ids)
    require(id >= 0 && std::size_t(id) < rows,
            "embedding_lookup: id " + std::to_string(id) + " out of range");
  auto out = make_impl({ids.size(), dim});
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::copy(table.data() + std::size_t(ids[i]) * dim,
              table.data() + (std::size_t(ids[i]) + 1) * dim,
              out->data.begin() + i * dim);
  if (g_grad_enabled && table.requires_grad()) {
    auto ti = table.impl();
    attach(out, {ti}, [ti, ids, dim](detail::TensorImpl& self) {
      ti->ensure_grad();
      for (std::size_t i = 0; i < ids.size(); ++i)
        kernels::axpy(1.0f, self.grad.data() + i * dim,
                      ti->grad.data() + std::size_t(ids[i]) * dim, dim);
    });
  }
  return Tensor(out);
}

Tensor pairwise_sum(const Tensor& a, const Tensor& b) {
  require_defined(a, "pairwise_sum");
  require_defined(b, "pairwise_sum");
  require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(1),
          "pairwise_sum: incompatible shapes " + shape_to_string(a.shape()) +
              " and " + shape_to_string(b.shape()));
  const std::size_t ra = a.dim(0), rb = b.dim(0), d = a.dim(1);
  auto out = make_impl({ra * rb, d});
  const float* pa = a.data();
  const float* pb = b.data();
  for (std::size_t i = 0; i < ra; ++i)
    for (std::size_t j = 0; j < rb; ++j)
      kernels::zip_add(pa + i * d, pb + j * d, out->data.data() + (i * rb + j) * d, d);
  if (g_grad_enabled && any_requires_grad({&a, &b})) {
    auto ai = a.impl(), bi = b.impl();
    attach(out, {ai, bi}, [ai, bi, ra, rb, d](detail::TensorImpl& self) {
      const float* dy = self.grad.data();
      if (ai->requires_grad) {
        ai->ensure_grad();
        for (std::size_t i = 0; i < ra; ++i)
          for (std::size_t j = 0; j < rb; ++j)
            kernels::axpy(1.0f, dy + (i * rb + j) * d, ai->grad.data() + i * d, d);
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        for (std::size_t i = 0; i < ra; ++i)
          for (std::size_t j = 0; j < rb; ++j)
            kernels::axpy(1.0f, dy + (i * rb + j) * d, bi->grad.data() + j * d, d);
      }
    });
  }
  return Tensor(out);
}

Tensor scale_rows(const Tensor& x, const Tensor& s) {
  require_defined(x, "scale_rows");
  require_defined(s, "scale_rows");
  require(x.rank() == 2, "scale_rows: x must be rank 2");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  require(s.numel() == rows, "scale_rows: scale length mismatch");
  auto out = make_impl(x.shape());
  const float* px = x.data();
  const float* ps = s.data();
  for (std::size_t r = 0; r < rows; ++r)
    kernels::scale(px + r * cols, ps[r], out->data.data() + r * cols, cols);
  if (g_grad_enabled && any_requires_grad({&x, &s})) {
    auto xi = x.impl(), si = s.impl();
    attach(out, {xi, si}, [xi, si, rows, cols](detail::TensorImpl& self) {
      const float* dy = self.grad.data();
      if (xi->requires_grad) {
        xi->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r)
          kernels::axpy(si->data[r], dy + r * cols, xi->grad.data() + r * cols, cols);
      }
      if (si->requires_grad) {
        si->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          double acc = 0.0;
          for (std::size_t c = 0; c < cols; ++c)
            acc += double(dy[r * cols + c]) * xi->data[r * cols + c];
          si->grad[r] += static_cast<float>(acc);
        }
      }
    });
  }
  return Tensor(out);
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
  require_defined(x, "layer_norm");
  auto [rows, cols] = as_rows_cols(x, "layer_norm");
  require(gamma.numel() == cols && beta.numel() == cols, "layer_norm: affine shape mismatch");
  auto out = make_impl(x.shape());
  std::vector<float> mean(rows), rstd(rows);
  kernels::layer_norm_rows(x.data(), gamma.data(), beta.data(), eps,
                           out->data.data(), mean.data(), rstd.data(), rows, cols);
  if (g_grad_enabled && any_requires_grad({&x, &gamma, &beta})) {
    auto xi = x.impl(), gi = gamma.impl(), bi = beta.impl();
    attach(out, {xi, gi, bi},
           [xi, gi, bi, rows, cols, mean, rstd](detail::TensorImpl& self) {
             const float* dy = self.grad.data();
             for (std::size_t r = 0; r < rows; ++r) {
               const float* xr = xi->data.data() + r * cols;
               const float* dyr = dy + r * cols;
               // xhat = (x - mean) * rstd
               double sum_dyg = 0.0, sum_dyg_xhat = 0.0;
               for (std::size_t c = 0; c < cols; ++c) {
                 const double xhat = (double(xr[c]) - mean[r]) * rstd[r];
                 const double dyg = double(dyr[c]) * gi->data[c];
                 sum_dyg += dyg;
                 sum_dyg_xhat += dyg * xhat;
               }
               if (xi->requires_grad) {
                 xi->ensure_grad();
                 float* dxr = xi->grad.data() + r * cols;
                 const double inv_n = 1.0 / double(cols);
                 for (std::size_t c = 0; c < cols; ++c) {
                   const double xhat = (double(xr[c]) - mean[r]) * rstd[r];
                   const double dyg = double(dyr[c]) * gi->data[c];
                   dxr[c] += static_cast<float>(
                       rstd[r] * (dyg - inv_n * sum_dyg - xhat * inv_n * sum_dyg_xhat));
                 }
               }
               if (gi->requires_grad) {
                 gi->ensure_grad();
                 for (std::size_t c = 0; c < cols; ++c) {
                   const double xhat = (double(xr[c]) - mean[r]) * rstd[r];
                   gi->grad[c] += static_cast<float>(double(dyr[c]) * xhat);
                 }
               }
               if (bi->requires_grad) {
                 bi->ensure_grad();
                 for (std::size_t c = 0; c < cols; ++c) bi->grad[c] += dyr[c];
               }
             }
           });
  }
  Tensor t(out);
  maybe_check(t, "layer_norm");
  return t;
}

Tensor dropout(const Tensor& x, float p, Rng& rng) {
  require_defined(x, "dropout");
  require(p >= 0.0f && p < 1.0f, "dropout: p must be in [0, 1)");
  if (p == 0.0f) return x;
  const std::size_t n = x.numel();
  std::vector<float> mask(n);
  const float keep_scale = 1.0f / (1.0f - p);
  for (std::size_t i = 0; i < n; ++i)
    mask[i] = (rng.uniform() < double(p)) ? 0.0f : keep_scale;
  auto out = make_impl(x.shape());
  kernels::zip_mul(x.data(), mask.data(), out->data.data(), n);
  if (g_grad_enabled && x.requires_grad()) {
    auto xi = x.impl();
    attach(out, {xi}, [xi, mask, n](detail::TensorImpl& self) {
      xi->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        xi->grad[i] += self.grad[i] * mask[i];
    });
  }
  return Tensor(out);
}

}  // namespace lamassu
