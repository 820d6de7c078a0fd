#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lamassu/tensor.hpp"

namespace lamassu {

struct NamedParam {
  std::string name;
  Tensor tensor;
};
using NamedParams = std::vector<NamedParam>;

std::size_t parameter_count(const NamedParams& params);

// Per-forward options. Dropout draws come from `rng`; evaluation and all
// equivalence/oracle paths run with training == false.
struct ForwardCtx {
  bool training = false;
  Rng* rng = nullptr;
};

// Chunked streaming attention mask: frame t may attend frame s iff
// floor(s/chunk) <= floor(t/chunk). Full left context, no lookahead past the
// end of t's chunk.
struct ChunkMask {
  std::size_t chunk_frames;
  std::size_t num_frames;

  ChunkMask(std::size_t chunk, std::size_t frames);
  bool allowed(std::size_t t, std::size_t s) const {
    return s / chunk_frames <= t / chunk_frames;
  }
  std::vector<std::uint8_t> matrix() const;  // [num_frames x num_frames]
};

struct Linear {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out]

  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng);
  Tensor forward(const Tensor& x) const { return linear(x, weight, bias); }
  std::size_t in_dim() const { return weight.dim(1); }
  std::size_t out_dim() const { return weight.dim(0); }
  void collect(const std::string& prefix, NamedParams& out) const;
};

struct LayerNorm {
  Tensor gamma, beta;
  float eps = 1e-5f;

  LayerNorm() = default;
  explicit LayerNorm(std::size_t dim);
  Tensor forward(const Tensor& x) const { return layer_norm(x, gamma, beta, eps); }
  void collect(const std::string& prefix, NamedParams& out) const;
};

struct Embedding {
  Tensor table;  // [rows x dim]

  Embedding() = default;
  Embedding(std::size_t rows, std::size_t dim, Rng& rng);
  Tensor forward(const std::vector<int>& ids) const {
    return embedding_lookup(table, ids);
  }
  void collect(const std::string& prefix, NamedParams& out) const;
};

// Standard multi-head self-attention with absolute inputs; masking is the
// streaming contract, enforced inside the softmax (masked weights are
// exactly zero).
struct MultiHeadAttention {
  Linear wq, wk, wv, wo;
  std::size_t heads = 1;

  MultiHeadAttention() = default;
  MultiHeadAttention(std::size_t model_dim, std::size_t num_heads, Rng& rng);
  Tensor forward(const Tensor& x, const std::vector<std::uint8_t>& allowed) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

// Per-layer key/value history for chunkwise streaming. Heads are stored as
// separate contiguous [len x head_dim] blocks, the same layout the full
// forward's column slices produce, so both paths replay identical kernels.
struct AttnCache {
  std::vector<std::vector<float>> k, v;  // [heads][len * head_dim]
  std::size_t len = 0;
};

// Pre-layer-norm Transformer layer: x + Attn(LN(x)), then x + FF(LN(x)).
// Feed-forward inner dim is 4x the model dim.
struct TransformerLayer {
  LayerNorm ln1, ln2;
  MultiHeadAttention attn;
  Linear ff1, ff2;
  float dropout_rate = 0.0f;

  TransformerLayer() = default;
  TransformerLayer(std::size_t model_dim, std::size_t num_heads, float dropout, Rng& rng);
  Tensor forward(const Tensor& x, const std::vector<std::uint8_t>& allowed,
                 ForwardCtx& ctx) const;
  // Streaming step: consumes one complete chunk of `n` frames, attends over
  // the cached history plus the new chunk, and writes [n x d] to `out`.
  // Feeding whole chunks makes this equal to forward() under a ChunkMask.
  void forward_incremental(AttnCache& cache, const float* x, std::size_t n,
                           float* out) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

struct LSTMState {
  Tensor h;  // [1 x d]
  Tensor c;  // [1 x d]
};

struct LSTMCell {
  Tensor w_ih;  // [4d x in], gate order i, f, g, o
  Tensor w_hh;  // [4d x d]
  Tensor b_ih, b_hh;
  std::size_t hidden = 0;

  LSTMCell() = default;
  LSTMCell(std::size_t in, std::size_t hidden_dim, Rng& rng);
  LSTMState zero_state() const;
  // x is [1 x in]; returns h' and the new state.
  std::pair<Tensor, LSTMState> step(const Tensor& x, const LSTMState& state) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

// Absolute sinusoidal positions for frames [offset, offset+frames).
Tensor positional_encoding(std::size_t frames, std::size_t dim, std::size_t offset);

}  // namespace lamassu
