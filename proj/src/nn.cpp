#include "lamassu/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "lamassu/kernels.hpp"

namespace lamassu {

std::size_t parameter_count(const NamedParams& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

ChunkMask::ChunkMask(std::size_t chunk, std::size_t frames)
    : chunk_frames(chunk), num_frames(frames) {
  if (chunk < 1) throw std::invalid_argument("ChunkMask: chunk_frames must be >= 1");
}

std::vector<std::uint8_t> ChunkMask::matrix() const {
  std::vector<std::uint8_t> m(num_frames * num_frames, 0);
  for (std::size_t t = 0; t < num_frames; ++t)
    for (std::size_t s = 0; s < num_frames; ++s)
      m[t * num_frames + s] = allowed(t, s) ? 1 : 0;
  return m;
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(in));
  weight = Tensor::uniform({out, in}, rng, -bound, bound, true);
  bias = Tensor::zeros({out}, true);
}

void Linear::collect(const std::string& prefix, NamedParams& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

LayerNorm::LayerNorm(std::size_t dim) {
  gamma = Tensor::full({dim}, 1.0f, true);
  beta = Tensor::zeros({dim}, true);
}

void LayerNorm::collect(const std::string& prefix, NamedParams& out) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

Embedding::Embedding(std::size_t rows, std::size_t dim, Rng& rng) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(dim));
  table = Tensor::uniform({rows, dim}, rng, -bound, bound, true);
}

void Embedding::collect(const std::string& prefix, NamedParams& out) const {
  out.push_back({prefix + ".table", table});
}

MultiHeadAttention::MultiHeadAttention(std::size_t model_dim, std::size_t num_heads,
                                       Rng& rng)
    : wq(model_dim, model_dim, rng),
      wk(model_dim, model_dim, rng),
      wv(model_dim, model_dim, rng),
      wo(model_dim, model_dim, rng),
      heads(num_heads) {
  if (num_heads == 0 || model_dim % num_heads != 0)
    throw std::invalid_argument("MultiHeadAttention: model dim not divisible by heads");
}

Tensor MultiHeadAttention::forward(const Tensor& x,
                                   const std::vector<std::uint8_t>& allowed) const {
  const std::size_t frames = x.dim(0);
  if (frames == 0) throw std::invalid_argument("attention: empty input");
  const std::size_t d = x.dim(1);
  const std::size_t dh = d / heads;
  const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(dh));

  Tensor q = wq.forward(x);
  Tensor k = wk.forward(x);
  Tensor v = wv.forward(x);

  std::vector<Tensor> head_out;
  head_out.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(q, h * dh, (h + 1) * dh);
    Tensor kh = slice_cols(k, h * dh, (h + 1) * dh);
    Tensor vh = slice_cols(v, h * dh, (h + 1) * dh);
    Tensor scores = scale(matmul_nt(qh, kh), inv_sqrt);
    Tensor probs = masked_softmax(scores, allowed);
    head_out.push_back(matmul(probs, vh));
  }
  return wo.forward(heads == 1 ? head_out[0] : concat_cols(head_out));
}

void MultiHeadAttention::collect(const std::string& prefix, NamedParams& out) const {
  wq.collect(prefix + ".wq", out);
  wk.collect(prefix + ".wk", out);
  wv.collect(prefix + ".wv", out);
  wo.collect(prefix + ".wo", out);
}

TransformerLayer::TransformerLayer(std::size_t model_dim, std::size_t num_heads,
                                   float dropout, Rng& rng)
    : ln1(model_dim),
      ln2(model_dim),
      attn(model_dim, num_heads, rng),
      ff1(model_dim, 4 * model_dim, rng),
      ff2(4 * model_dim, model_dim, rng),
      dropout_rate(dropout) {}

Tensor TransformerLayer::forward(const Tensor& x,
                                 const std::vector<std::uint8_t>& allowed,
                                 ForwardCtx& ctx) const {
  Tensor a = attn.forward(ln1.forward(x), allowed);
  if (ctx.training && dropout_rate > 0.0f) a = dropout(a, dropout_rate, *ctx.rng);
  Tensor x1 = add(x, a);
  Tensor f = ff2.forward(relu(ff1.forward(ln2.forward(x1))));
  if (ctx.training && dropout_rate > 0.0f) f = dropout(f, dropout_rate, *ctx.rng);
  return add(x1, f);
}

void TransformerLayer::forward_incremental(AttnCache& cache, const float* x,
                                           std::size_t n, float* out) const {
  const std::size_t d = attn.wq.in_dim();
  const std::size_t heads = attn.heads;
  const std::size_t dh = d / heads;
  const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(dh));

  if (cache.k.empty()) {
    cache.k.resize(heads);
    cache.v.resize(heads);
  }

  std::vector<float> h(n * d), q(n * d), k(n * d), v(n * d);
  kernels::layer_norm_rows(x, ln1.gamma.data(), ln1.beta.data(), ln1.eps, h.data(),
                           nullptr, nullptr, n, d);
  auto project = [&](const Linear& lin, float* dst) {
    kernels::gemm(false, true, n, d, d, h.data(), lin.weight.data(), dst, false);
    kernels::add_bias_rows(dst, lin.bias.data(), n, d);
  };
  project(attn.wq, q.data());
  project(attn.wk, k.data());
  project(attn.wv, v.data());

  for (std::size_t hd = 0; hd < heads; ++hd) {
    for (std::size_t i = 0; i < n; ++i) {
      cache.k[hd].insert(cache.k[hd].end(), k.begin() + i * d + hd * dh,
                         k.begin() + i * d + (hd + 1) * dh);
      cache.v[hd].insert(cache.v[hd].end(), v.begin() + i * d + hd * dh,
                         v.begin() + i * d + (hd + 1) * dh);
    }
  }
  cache.len += n;
  const std::size_t total = cache.len;

  std::vector<float> ctx(n * d);
  std::vector<float> qh(n * dh), scores(n * total), probs(n * total), ctxh(n * dh);
  for (std::size_t hd = 0; hd < heads; ++hd) {
    for (std::size_t i = 0; i < n; ++i)
      std::copy(q.begin() + i * d + hd * dh, q.begin() + i * d + (hd + 1) * dh,
                qh.begin() + i * dh);
    kernels::gemm(false, true, n, total, dh, qh.data(), cache.k[hd].data(),
                  scores.data(), false);
    kernels::scale(scores.data(), inv_sqrt, scores.data(), n * total);
    kernels::softmax_rows(scores.data(), probs.data(), n, total);
    kernels::gemm(false, false, n, dh, total, probs.data(), cache.v[hd].data(),
                  ctxh.data(), false);
    for (std::size_t i = 0; i < n; ++i)
      std::copy(ctxh.begin() + i * dh, ctxh.begin() + (i + 1) * dh,
                ctx.begin() + i * d + hd * dh);
  }

  std::vector<float> a(n * d);
  kernels::gemm(false, true, n, d, d, ctx.data(), attn.wo.weight.data(), a.data(), false);
  kernels::add_bias_rows(a.data(), attn.wo.bias.data(), n, d);
  kernels::zip_add(x, a.data(), a.data(), n * d);  // residual

  const std::size_t inner = ff1.out_dim();
  std::vector<float> h2(n * d), f1(n * inner), f2(n * d);
  kernels::layer_norm_rows(a.data(), ln2.gamma.data(), ln2.beta.data(), ln2.eps,
                           h2.data(), nullptr, nullptr, n, d);
  kernels::gemm(false, true, n, inner, d, h2.data(), ff1.weight.data(), f1.data(), false);
  kernels::add_bias_rows(f1.data(), ff1.bias.data(), n, inner);
  kernels::map_relu(f1.data(), f1.data(), n * inner);
  kernels::gemm(false, true, n, d, inner, f1.data(), ff2.weight.data(), f2.data(), false);
  kernels::add_bias_rows(f2.data(), ff2.bias.data(), n, d);
  kernels::zip_add(a.data(), f2.data(), out, n * d);
}

void TransformerLayer::collect(const std::string& prefix, NamedParams& out) const {
  ln1.collect(prefix + ".ln1", out);
  attn.collect(prefix + ".attn", out);
  ln2.collect(prefix + ".ln2", out);
  ff1.collect(prefix + ".ff1", out);
  ff2.collect(prefix + ".ff2", out);
}

LSTMCell::LSTMCell(std::size_t in, std::size_t hidden_dim, Rng& rng) : hidden(hidden_dim) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(hidden_dim));
  w_ih = Tensor::uniform({4 * hidden_dim, in}, rng, -bound, bound, true);
  w_hh = Tensor::uniform({4 * hidden_dim, hidden_dim}, rng, -bound, bound, true);
  std::vector<float> bi(4 * hidden_dim, 0.0f);
  // forget-gate bias starts at 1
  for (std::size_t i = hidden_dim; i < 2 * hidden_dim; ++i) bi[i] = 1.0f;
  b_ih = Tensor::from({4 * hidden_dim}, std::move(bi), true);
  b_hh = Tensor::zeros({4 * hidden_dim}, true);
}

LSTMState LSTMCell::zero_state() const {
  return {Tensor::zeros({1, hidden}), Tensor::zeros({1, hidden})};
}

std::pair<Tensor, LSTMState> LSTMCell::step(const Tensor& x, const LSTMState& state) const {
  Tensor gates = add(linear(x, w_ih, b_ih), linear(state.h, w_hh, b_hh));
  Tensor i = sigmoid(slice_cols(gates, 0, hidden));
  Tensor f = sigmoid(slice_cols(gates, hidden, 2 * hidden));
  Tensor g = tanh(slice_cols(gates, 2 * hidden, 3 * hidden));
  Tensor o = sigmoid(slice_cols(gates, 3 * hidden, 4 * hidden));
  Tensor c_next = add(mul(f, state.c), mul(i, g));
  Tensor h_next = mul(o, tanh(c_next));
  return {h_next, {h_next, c_next}};
}

void LSTMCell::collect(const std::string& prefix, NamedParams& out) const {
  out.push_back({prefix + ".w_ih", w_ih});
  out.push_back({prefix + ".w_hh", w_hh});
  out.push_back({prefix + ".b_ih", b_ih});
  out.push_back({prefix + ".b_hh", b_hh});
}

Tensor positional_encoding(std::size_t frames, std::size_t dim, std::size_t offset) {
  std::vector<float> pe(frames * dim);
  for (std::size_t t = 0; t < frames; ++t) {
    const double pos = static_cast<double>(t + offset);
    for (std::size_t i = 0; i < dim; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / double(dim));
      pe[t * dim + i] = static_cast<float>(std::sin(pos * freq));
      if (i + 1 < dim) pe[t * dim + i + 1] = static_cast<float>(std::cos(pos * freq));
    }
  }
  return Tensor::from({frames, dim}, std::move(pe));
}

}  // namespace lamassu
