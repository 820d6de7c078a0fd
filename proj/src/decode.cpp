#include "lamassu/decode.hpp"

#include <algorithm>

namespace lamassu {

DecodeOptions decode_options_from(const Config& cfg) {
  DecodeOptions opts;
  opts.chunk_frames = cfg.model.chunk_frames;
  opts.max_symbols_per_frame = cfg.model.max_symbols_per_frame;
  return opts;
}

namespace {

std::vector<std::uint8_t> allowed_outputs(const Model& model, std::size_t k,
                                          const DecodeOptions& opts) {
  const std::size_t dim = model.heads.head_for(k).joint.output_dim();
  std::vector<std::uint8_t> allowed(dim, 1);
  if (opts.restrict_to_target && model.cfg.model.variant == Variant::UNI) {
    std::fill(allowed.begin(), allowed.end(), 0);
    for (int id : model.vocab.to_merged[k]) allowed[std::size_t(id)] = 1;
    allowed[std::size_t(model.vocab.merged_blank_id)] = 1;
    allowed[std::size_t(model.vocab.merged_eos_id)] = 1;
  }
  return allowed;
}

int argmax_allowed(const float* z, const std::vector<std::uint8_t>& allowed) {
  int best = -1;
  float best_v = 0.0f;
  for (std::size_t i = 0; i < allowed.size(); ++i) {
    if (!allowed[i]) continue;
    if (best < 0 || z[i] > best_v) {
      best = static_cast<int>(i);
      best_v = z[i];
    }
  }
  return best;
}

struct GreedyLoop {
  const Model& model;
  std::size_t k;
  const DecodeOptions& opts;
  std::vector<std::uint8_t> allowed;
  const TransducerHead& head;
  PredictionNetwork::State pred;
  int blank, eos;
  bool stopped = false;
  DecodeResult result;

  GreedyLoop(const Model& m, std::size_t target, const DecodeOptions& o)
      : model(m),
        k(target),
        opts(o),
        allowed(allowed_outputs(m, target, o)),
        head(m.heads.head_for(target)),
        pred(head.prediction.begin(m.heads.start_token(target))),
        blank(m.heads.blank_id(target)),
        eos(m.heads.eos_id(target)) {}

  // Runs the per-frame symbol loop; avail is the chunk-end frame count
  // (uncapped; the caller clamps when the true total is known).
  void consume_frame(const float* h_enc_row, std::size_t enc_dim, std::size_t avail) {
    Tensor h = Tensor::from({1, enc_dim}, std::vector<float>(h_enc_row, h_enc_row + enc_dim));
    for (std::size_t symbols = 0; symbols < opts.max_symbols_per_frame; ++symbols) {
      Tensor z = head.joint.step(h, pred.h);
      const int y = argmax_allowed(z.data(), allowed);
      if (y == blank) break;
      if (y == eos) {
        stopped = true;
        return;
      }
      result.token_ids.push_back(y);
      result.trace.items.push_back({y, avail});
      head.prediction.step(pred, y);
    }
  }
};

void finalize(GreedyLoop& loop, const Model& model, std::size_t k,
              std::size_t enc_frames, std::size_t raw_frames) {
  const std::size_t factor = model.cfg.model.subsample ? 2 : 1;
  for (auto& item : loop.result.trace.items) {
    const std::size_t capped = std::min(item.frames_consumed, enc_frames);
    item.frames_consumed = std::min(capped * factor, raw_frames);
  }
  loop.result.trace.total_frames = raw_frames;
  for (int id : loop.result.token_ids)
    loop.result.tokens.push_back(model.token_text(k, id));
}

}  // namespace

DecodeResult greedy_decode_streaming(const Model& model, const Tensor& features,
                                     std::size_t k, const DecodeOptions& opts) {
  NoGradGuard no_grad;
  const std::size_t raw_frames = features.dim(0);
  Tensor x = model.cfg.model.target_lid_for_encoder
                 ? augment_target_lid(features, k, model.num_targets())
                 : features;
  const std::size_t aug_dim = x.dim(1);
  const std::size_t factor = model.cfg.model.subsample ? 2 : 1;
  const std::size_t raw_chunk = opts.chunk_frames * factor;

  GreedyLoop loop(model, k, opts);
  EncoderStream stream = model.encoder.begin_stream(all_ones_gates(model.num_clusters()));

  std::size_t fed = 0, enc_seen = 0;
  while (fed < raw_frames && !loop.stopped) {
    const std::size_t n = std::min(raw_chunk, raw_frames - fed);
    std::vector<float> rows =
        model.encoder.stream_chunk(stream, x.data() + fed * aug_dim, n);
    fed += n;
    const std::size_t produced = rows.size() / model.encoder.model_dim;
    for (std::size_t r = 0; r < produced && !loop.stopped; ++r) {
      const std::size_t t_enc = enc_seen + r;
      const std::size_t avail = (t_enc / opts.chunk_frames + 1) * opts.chunk_frames;
      loop.consume_frame(rows.data() + r * model.encoder.model_dim,
                         model.encoder.model_dim, avail);
    }
    enc_seen += produced;
  }
  finalize(loop, model, k, stream.enc_frames, raw_frames);
  return loop.result;
}

DecodeResult greedy_decode_offline(const Model& model, const Tensor& features,
                                   std::size_t k, const DecodeOptions& opts) {
  NoGradGuard no_grad;
  const std::size_t raw_frames = features.dim(0);
  ForwardCtx ctx;
  GateVector gates = all_ones_gates(model.num_clusters());
  Tensor x = model.cfg.model.target_lid_for_encoder
                 ? augment_target_lid(features, k, model.num_targets())
                 : features;
  const std::size_t enc_frames = model.encoder.encoded_frames(x.dim(0));
  ChunkMask mask(opts.chunk_frames, enc_frames);
  EncoderOutput enc = model.encoder.forward(x, gates, mask, ctx);

  GreedyLoop loop(model, k, opts);
  const std::size_t d = model.encoder.model_dim;
  for (std::size_t t = 0; t < enc_frames && !loop.stopped; ++t) {
    const std::size_t avail = (t / opts.chunk_frames + 1) * opts.chunk_frames;
    loop.consume_frame(enc.h_enc.data() + t * d, d, avail);
  }
  finalize(loop, model, k, enc_frames, raw_frames);
  return loop.result;
}

}  // namespace lamassu
