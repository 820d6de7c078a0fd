#include "lamassu/encoder.hpp"

#include <stdexcept>
#include <string>

#include "lamassu/kernels.hpp"

namespace lamassu {

GateVector one_hot_gates(std::size_t cluster, std::size_t num_clusters) {
  if (cluster >= num_clusters)
    throw std::invalid_argument("one_hot_gates: cluster index out of range");
  GateVector g(num_clusters, 0.0f);
  g[cluster] = 1.0f;
  return g;
}

GateVector all_ones_gates(std::size_t num_clusters) {
  return GateVector(num_clusters, 1.0f);
}

Tensor augment_target_lid(const Tensor& x, std::size_t k, std::size_t num_targets) {
  if (k >= num_targets)
    throw std::invalid_argument("augment_target_lid: target index " + std::to_string(k) +
                                " out of range for " + std::to_string(num_targets));
  const std::size_t frames = x.dim(0), d = x.dim(1);
  std::vector<float> out(frames * (d + num_targets), 0.0f);
  const float* src = x.data();
  for (std::size_t t = 0; t < frames; ++t) {
    std::copy(src + t * d, src + (t + 1) * d, out.begin() + t * (d + num_targets));
    out[t * (d + num_targets) + d + k] = 1.0f;
  }
  return Tensor::from({frames, d + num_targets}, std::move(out));
}

Tensor pair_concat(const Tensor& x) {
  const std::size_t frames = x.dim(0), d = x.dim(1);
  const std::size_t pairs = frames / 2;
  std::vector<float> out(pairs * 2 * d);
  const float* src = x.data();
  for (std::size_t t = 0; t < pairs; ++t)
    std::copy(src + 2 * t * d, src + (2 * t + 2) * d, out.begin() + t * 2 * d);
  return Tensor::from({pairs, 2 * d}, std::move(out));
}

void TransformerStack::collect(const std::string& prefix, NamedParams& out) const {
  for (std::size_t i = 0; i < layers.size(); ++i)
    layers[i].collect(prefix + ".layer" + std::to_string(i), out);
}

ClusteredBlock::Out ClusteredBlock::forward(const Tensor& h_prev, const GateVector& gates,
                                            const std::vector<std::uint8_t>& allowed,
                                            ForwardCtx& ctx) const {
  const std::size_t clusters = separate.size();
  if (gates.size() != clusters)
    throw std::invalid_argument("ClusteredBlock: gate vector has " +
                                std::to_string(gates.size()) + " entries, block has " +
                                std::to_string(clusters) + " clusters");

  // v_j = e_j * g_j, the external gating of each cluster's output
  std::vector<Tensor> gated(clusters);
  for (std::size_t j = 0; j < clusters; ++j)
    gated[j] = scale(separate[j].forward(h_prev, allowed, ctx), gates[j]);

  // per-cluster projections summed, tanh, shared projection to J logits
  Tensor w_sum = proj[0].forward(gated[0]);
  for (std::size_t j = 1; j < clusters; ++j)
    w_sum = add(w_sum, proj[j].forward(gated[j]));
  Tensor w_out = shared_proj.forward(tanh(w_sum));
  Tensor w_concat = softmax(w_out);

  // reweight each cluster by its estimated weight and sum
  Tensor mix = scale_rows(gated[0], slice_cols(w_concat, 0, 1));
  for (std::size_t j = 1; j < clusters; ++j)
    mix = add(mix, scale_rows(gated[j], slice_cols(w_concat, j, j + 1)));

  return {shared.forward(mix, allowed, ctx), w_out};
}

void ClusteredBlock::collect(const std::string& prefix, NamedParams& out) const {
  for (std::size_t j = 0; j < separate.size(); ++j)
    separate[j].collect(prefix + ".sep" + std::to_string(j), out);
  for (std::size_t j = 0; j < proj.size(); ++j)
    proj[j].collect(prefix + ".proj" + std::to_string(j), out);
  shared_proj.collect(prefix + ".shared_proj", out);
  shared.collect(prefix + ".shared", out);
}

namespace {

TransformerStack make_stack(std::size_t layers, std::size_t d, std::size_t heads,
                            float dropout, Rng& rng) {
  TransformerStack s;
  s.layers.reserve(layers);
  for (std::size_t i = 0; i < layers; ++i) s.layers.emplace_back(d, heads, dropout, rng);
  return s;
}

}  // namespace

Encoder::Encoder(std::size_t in_dim, std::size_t d, std::size_t heads,
                 std::size_t num_blocks, std::size_t clusters,
                 std::size_t separate_layers, std::size_t shared_layers,
                 bool subsample_pairs, float dropout, Rng& rng)
    : input_dim(in_dim), model_dim(d), subsample(subsample_pairs) {
  if (clusters < 1) throw std::invalid_argument("Encoder: need at least one cluster");
  input_proj = Linear(subsample ? 2 * in_dim : in_dim, d, rng);
  blocks.resize(num_blocks);
  for (auto& block : blocks) {
    for (std::size_t j = 0; j < clusters; ++j) {
      block.separate.push_back(make_stack(separate_layers, d, heads, dropout, rng));
      block.proj.emplace_back(d, d, rng);
    }
    block.shared_proj = Linear(d, clusters, rng);
    block.shared = make_stack(shared_layers, d, heads, dropout, rng);
  }
}

EncoderOutput Encoder::forward(const Tensor& x_aug, const GateVector& gates,
                               const ChunkMask& mask, ForwardCtx& ctx) const {
  Tensor x = subsample ? pair_concat(x_aug) : x_aug;
  const std::size_t frames = x.dim(0);
  if (frames == 0) throw std::invalid_argument("Encoder: empty input");
  if (x.dim(1) != input_proj.in_dim())
    throw std::invalid_argument("Encoder: input dim " + std::to_string(x.dim(1)) +
                                ", expected " + std::to_string(input_proj.in_dim()));
  if (mask.num_frames != frames)
    throw std::invalid_argument("Encoder: mask covers " + std::to_string(mask.num_frames) +
                                " frames, input has " + std::to_string(frames));

  Tensor h = add(input_proj.forward(x), positional_encoding(frames, model_dim, 0));
  const auto allowed = mask.matrix();

  Tensor lid_sums;
  for (const auto& block : blocks) {
    auto out = block.forward(h, gates, allowed, ctx);
    h = out.h;
    if (num_clusters() > 1) {
      Tensor m = mean_rows(out.w_out);
      lid_sums = lid_sums.defined() ? add(lid_sums, m) : m;
    }
  }
  return {h, lid_sums};
}

EncoderStream Encoder::begin_stream(GateVector gates) const {
  if (gates.size() != num_clusters())
    throw std::invalid_argument("begin_stream: gate vector size mismatch");
  EncoderStream st;
  st.gates = std::move(gates);
  st.caches.resize(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& block = blocks[b];
    std::size_t per_block = 0;
    for (const auto& stack : block.separate) per_block += stack.layers.size();
    per_block += block.shared.layers.size();
    st.caches[b].resize(per_block);
  }
  return st;
}

std::vector<float> Encoder::stream_chunk(EncoderStream& st, const float* frames,
                                         std::size_t n) const {
  // assemble encoder-rate input rows
  std::vector<float> input;
  std::size_t rows = 0;
  const std::size_t raw_dim = input_dim;
  if (subsample) {
    std::vector<float> buf;
    if (st.has_carry) buf.insert(buf.end(), st.carry.begin(), st.carry.end());
    buf.insert(buf.end(), frames, frames + n * raw_dim);
    const std::size_t raw = buf.size() / raw_dim;
    rows = raw / 2;
    input.assign(buf.begin(), buf.begin() + rows * 2 * raw_dim);
    st.has_carry = (raw % 2) != 0;
    if (st.has_carry) st.carry.assign(buf.end() - raw_dim, buf.end());
  } else {
    rows = n;
    input.assign(frames, frames + n * raw_dim);
  }
  if (rows == 0) return {};

  const std::size_t d = model_dim;
  std::vector<float> h(rows * d);
  kernels::gemm(false, true, rows, d, input_proj.in_dim(), input.data(),
                input_proj.weight.data(), h.data(), false);
  kernels::add_bias_rows(h.data(), input_proj.bias.data(), rows, d);
  Tensor pe = positional_encoding(rows, d, st.enc_frames);
  kernels::zip_add(h.data(), pe.data(), h.data(), rows * d);

  const std::size_t clusters = num_clusters();
  std::vector<float> buf_a(rows * d), buf_b(rows * d);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& block = blocks[b];
    std::size_t cache_idx = 0;

    // separate stacks, gated
    std::vector<std::vector<float>> gated(clusters);
    for (std::size_t j = 0; j < clusters; ++j) {
      std::vector<float> cur = h;
      for (const auto& layer : block.separate[j].layers) {
        layer.forward_incremental(st.caches[b][cache_idx++], cur.data(), rows,
                                  buf_a.data());
        cur.assign(buf_a.begin(), buf_a.begin() + rows * d);
      }
      kernels::scale(cur.data(), st.gates[j], cur.data(), rows * d);
      gated[j] = std::move(cur);
    }

    // weight estimation: summed projections, tanh, shared projection, softmax
    std::vector<float> w_sum(rows * d), tmp(rows * d);
    kernels::gemm(false, true, rows, d, d, gated[0].data(), block.proj[0].weight.data(),
                  w_sum.data(), false);
    kernels::add_bias_rows(w_sum.data(), block.proj[0].bias.data(), rows, d);
    for (std::size_t j = 1; j < clusters; ++j) {
      kernels::gemm(false, true, rows, d, d, gated[j].data(), block.proj[j].weight.data(),
                    tmp.data(), false);
      kernels::add_bias_rows(tmp.data(), block.proj[j].bias.data(), rows, d);
      kernels::zip_add(w_sum.data(), tmp.data(), w_sum.data(), rows * d);
    }
    kernels::map_tanh(w_sum.data(), w_sum.data(), rows * d);
    std::vector<float> w_out(rows * clusters), w_concat(rows * clusters);
    kernels::gemm(false, true, rows, clusters, d, w_sum.data(),
                  block.shared_proj.weight.data(), w_out.data(), false);
    kernels::add_bias_rows(w_out.data(), block.shared_proj.bias.data(), rows, clusters);
    kernels::softmax_rows(w_out.data(), w_concat.data(), rows, clusters);

    // reweighted mixture
    std::vector<float> mix(rows * d);
    for (std::size_t r = 0; r < rows; ++r)
      kernels::scale(gated[0].data() + r * d, w_concat[r * clusters], mix.data() + r * d, d);
    for (std::size_t j = 1; j < clusters; ++j) {
      for (std::size_t r = 0; r < rows; ++r)
        kernels::scale(gated[j].data() + r * d, w_concat[r * clusters + j],
                       buf_b.data() + r * d, d);
      kernels::zip_add(mix.data(), buf_b.data(), mix.data(), rows * d);
    }

    // shared stack
    std::vector<float> cur = std::move(mix);
    for (const auto& layer : block.shared.layers) {
      layer.forward_incremental(st.caches[b][cache_idx++], cur.data(), rows, buf_a.data());
      cur.assign(buf_a.begin(), buf_a.begin() + rows * d);
    }
    h = std::move(cur);
  }

  st.enc_frames += rows;
  return h;
}

void Encoder::collect(const std::string& prefix, NamedParams& out) const {
  input_proj.collect(prefix + ".input_proj", out);
  for (std::size_t b = 0; b < blocks.size(); ++b)
    blocks[b].collect(prefix + ".block" + std::to_string(b), out);
}

}  // namespace lamassu
