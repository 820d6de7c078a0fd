#pragma once

#include <string>
#include <vector>

#include "lamassu/model.hpp"

namespace lamassu {

// Per-emitted-token record of input consumption for latency metrics. A frame
// counts as consumed only when its whole chunk is available, so chunked
// streaming is accounted honestly.
struct EmissionTrace {
  struct Item {
    int token_id;
    std::size_t frames_consumed;  // raw input frames, 1-based count
  };
  std::vector<Item> items;
  std::size_t total_frames = 0;  // raw input frames in the utterance
};

struct DecodeResult {
  std::vector<int> token_ids;
  std::vector<std::string> tokens;
  EmissionTrace trace;
};

struct DecodeOptions {
  std::size_t chunk_frames = 4;          // encoder-rate chunk
  std::size_t max_symbols_per_frame = 10;
  bool restrict_to_target = false;  // mask decoding to target-language tokens
};

DecodeOptions decode_options_from(const Config& cfg);

// Greedy streaming decode: consumes features chunk by chunk through the
// cached encoder, emitting argmax tokens per frame; blank or the per-frame
// symbol cap advances the frame, EOS or frame exhaustion stops.
DecodeResult greedy_decode_streaming(const Model& model, const Tensor& features,
                                     std::size_t k, const DecodeOptions& opts);

// Same greedy search over a full-utterance encoder forward under the same
// chunk mask; tokens must match the streaming path exactly.
DecodeResult greedy_decode_offline(const Model& model, const Tensor& features,
                                   std::size_t k, const DecodeOptions& opts);

}  // namespace lamassu
