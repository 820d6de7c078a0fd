#pragma once

#include <cstdint>
#include <vector>

#include "lamassu/nn.hpp"
#include "lamassu/tensor.hpp"

namespace lamassu {

// External per-cluster gate values for one utterance, broadcast over frames.
// Training phase 1 uses a one-hot vector for the utterance's source cluster;
// phase 2 and all inference use all ones.
using GateVector = std::vector<float>;

GateVector one_hot_gates(std::size_t cluster, std::size_t num_clusters);
GateVector all_ones_gates(std::size_t num_clusters);

// Appends a K-dim one-hot target-language suffix to every frame.
Tensor augment_target_lid(const Tensor& x, std::size_t k, std::size_t num_targets);

// Stride-2 subsampling by concatenating adjacent frame pairs; a trailing odd
// frame is dropped.
Tensor pair_concat(const Tensor& x);

struct TransformerStack {
  std::vector<TransformerLayer> layers;

  Tensor forward(const Tensor& x, const std::vector<std::uint8_t>& allowed,
                 ForwardCtx& ctx) const {
    Tensor h = x;
    for (const auto& layer : layers) h = layer.forward(h, allowed, ctx);
    return h;
  }
  void collect(const std::string& prefix, NamedParams& out) const;
};

// One clustered block: J per-cluster Transformer stacks, external gating, a
// weight-estimation mixer (per-cluster projections summed, tanh, one shared
// projection to J logits, softmax, per-cluster reweighting), then a shared
// Transformer stack over the summed mixture.
struct ClusteredBlock {
  std::vector<TransformerStack> separate;  // J stacks
  std::vector<Linear> proj;                // J mixers, d -> d
  Linear shared_proj;                      // d -> J, one instance reused by all clusters
  TransformerStack shared;

  struct Out {
    Tensor h;      // [T x d]
    Tensor w_out;  // [T x J] pre-softmax weight-estimation logits
  };
  Out forward(const Tensor& h_prev, const GateVector& gates,
              const std::vector<std::uint8_t>& allowed, ForwardCtx& ctx) const;

  std::size_t num_clusters() const { return separate.size(); }
  void collect(const std::string& prefix, NamedParams& out) const;
};

struct EncoderOutput {
  Tensor h_enc;           // [T x d]
  Tensor lid_logit_sums;  // [J]; defined only when J > 1
};

struct EncoderStream;

struct Encoder {
  std::size_t input_dim = 0;  // feature dim after LID augmentation
  std::size_t model_dim = 0;
  bool subsample = false;
  Linear input_proj;
  std::vector<ClusteredBlock> blocks;

  Encoder() = default;
  Encoder(std::size_t in_dim, std::size_t d, std::size_t heads, std::size_t num_blocks,
          std::size_t clusters, std::size_t separate_layers, std::size_t shared_layers,
          bool subsample_pairs, float dropout, Rng& rng);

  std::size_t num_clusters() const { return blocks.empty() ? 1 : blocks[0].num_clusters(); }
  // Encoder frame count for a raw (augmented) frame count.
  std::size_t encoded_frames(std::size_t raw_frames) const {
    return subsample ? raw_frames / 2 : raw_frames;
  }

  // Full-utterance forward. The mask must cover encoded_frames(x rows).
  EncoderOutput forward(const Tensor& x_aug, const GateVector& gates,
                        const ChunkMask& mask, ForwardCtx& ctx) const;

  // Chunkwise streaming with cached attention state. Feeding chunk_frames
  // frames per call reproduces forward() under ChunkMask(chunk_frames, T).
  EncoderStream begin_stream(GateVector gates) const;
  // Returns the encoder output rows produced by this chunk ([m x d]).
  std::vector<float> stream_chunk(EncoderStream& stream, const float* frames,
                                  std::size_t n) const;

  void collect(const std::string& prefix, NamedParams& out) const;
};

struct EncoderStream {
  GateVector gates;
  std::size_t enc_frames = 0;  // encoder frames emitted so far
  std::vector<float> carry;    // pending raw frame when subsampling
  bool has_carry = false;
  // caches[block]: J * separate_layers caches, then shared_layers caches
  std::vector<std::vector<AttnCache>> caches;
};

}  // namespace lamassu
