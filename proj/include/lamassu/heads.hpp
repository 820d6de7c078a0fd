#pragma once

#include <string>
#include <vector>

#include "lamassu/config.hpp"
#include "lamassu/nn.hpp"
#include "lamassu/vocab.hpp"

namespace lamassu {

// Autoregressive network over previously emitted tokens: embedding plus an
// LSTM stack. The first input is the start-of-sentence token (SPE) or the
// target-LID token (UNI); state is reset per utterance.
struct PredictionNetwork {
  Embedding embedding;
  std::vector<LSTMCell> lstm;

  PredictionNetwork() = default;
  PredictionNetwork(std::size_t vocab_rows, std::size_t d_p, std::size_t layers, Rng& rng);

  // Training path: h_pred rows for prediction positions u = 0..U, feeding
  // [start, y_1 .. y_U].
  Tensor forward_sequence(int start_token, const std::vector<int>& labels) const;

  struct State {
    std::vector<LSTMState> layers;
    Tensor h;  // [1 x d_p] output for the current position
  };
  State begin(int start_token) const;
  void step(State& state, int token) const;

  void collect(const std::string& prefix, NamedParams& out) const;
};

// z_{t,u} = linear_out(tanh(linear_enc(h_enc_t) + linear_pred(h_pred_u))).
// The CTC projection reuses linear_enc/linear_out, so enabling it adds no
// parameters.
struct JointNetwork {
  Linear linear_enc;   // d -> d_j
  Linear linear_pred;  // d_p -> d_j
  Linear linear_out;   // d_j -> |V| + 2 (blank, EOS)

  JointNetwork() = default;
  JointNetwork(std::size_t d, std::size_t d_p, std::size_t d_j, std::size_t out_dim,
               Rng& rng);

  // Full lattice: [T, U+1, |V|+2] logits for every (frame, prediction) pair.
  Tensor all_pairs(const Tensor& h_enc, const Tensor& h_pred) const;
  // Single lattice point (decode path): [1 x |V|+2].
  Tensor step(const Tensor& h_enc_row, const Tensor& h_pred_row) const;
  // CTC head: linear_out(tanh(linear_enc(h_enc))), the joint with the
  // prediction path removed.
  Tensor ctc_logits(const Tensor& h_enc) const;

  std::size_t output_dim() const { return linear_out.out_dim(); }
  void collect(const std::string& prefix, NamedParams& out) const;
};

struct TransducerHead {
  PredictionNetwork prediction;
  JointNetwork joint;

  void collect(const std::string& prefix, NamedParams& out) const;
};

// SPE: one independent head per target language, no shared parameters.
// UNI: a single head over the merged vocabulary, selected by LID start token.
struct HeadBank {
  Variant variant = Variant::UNI;
  std::vector<TransducerHead> heads;

  HeadBank() = default;
  HeadBank(Variant variant, const VocabularySpec& vocab, std::size_t d, std::size_t d_p,
           std::size_t d_j, std::size_t lstm_layers, Rng& rng);

  const TransducerHead& spe_select(std::size_t k) const;
  int uni_start_token(std::size_t k) const;

  // Variant-independent decode surface.
  const TransducerHead& head_for(std::size_t k) const;
  int start_token(std::size_t k) const;
  int blank_id(std::size_t k) const;
  int eos_id(std::size_t k) const;

  void collect(const std::string& prefix, NamedParams& out) const;

  const VocabularySpec* vocab = nullptr;  // not owned
};

}  // namespace lamassu
