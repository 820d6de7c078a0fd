#include "lamassu/heads.hpp"

#include <stdexcept>

namespace lamassu {

PredictionNetwork::PredictionNetwork(std::size_t vocab_rows, std::size_t d_p,
                                     std::size_t layers, Rng& rng)
    : embedding(vocab_rows, d_p, rng) {
  if (layers == 0) throw std::invalid_argument("PredictionNetwork: need >= 1 LSTM layer");
  for (std::size_t i = 0; i < layers; ++i) lstm.emplace_back(d_p, d_p, rng);
}

Tensor PredictionNetwork::forward_sequence(int start_token,
                                           const std::vector<int>& labels) const {
  std::vector<int> ids;
  ids.reserve(labels.size() + 1);
  ids.push_back(start_token);
  ids.insert(ids.end(), labels.begin(), labels.end());

  Tensor inputs = embedding.forward(ids);
  std::vector<LSTMState> states;
  states.reserve(lstm.size());
  for (const auto& cell : lstm) states.push_back(cell.zero_state());

  std::vector<Tensor> rows;
  rows.reserve(ids.size());
  for (std::size_t u = 0; u < ids.size(); ++u) {
    Tensor x = slice_rows(inputs, u, u + 1);
    for (std::size_t l = 0; l < lstm.size(); ++l) {
      auto [h, next] = lstm[l].step(x, states[l]);
      states[l] = next;
      x = h;
    }
    rows.push_back(x);
  }
  return rows.size() == 1 ? rows[0] : concat_rows(rows);
}

PredictionNetwork::State PredictionNetwork::begin(int start_token) const {
  State st;
  for (const auto& cell : lstm) st.layers.push_back(cell.zero_state());
  step(st, start_token);
  return st;
}

void PredictionNetwork::step(State& state, int token) const {
  Tensor x = embedding.forward({token});
  for (std::size_t l = 0; l < lstm.size(); ++l) {
    auto [h, next] = lstm[l].step(x, state.layers[l]);
    state.layers[l] = next;
    x = h;
  }
  state.h = x;
}

void PredictionNetwork::collect(const std::string& prefix, NamedParams& out) const {
  embedding.collect(prefix + ".embedding", out);
  for (std::size_t l = 0; l < lstm.size(); ++l)
    lstm[l].collect(prefix + ".lstm" + std::to_string(l), out);
}

JointNetwork::JointNetwork(std::size_t d, std::size_t d_p, std::size_t d_j,
                           std::size_t out_dim, Rng& rng)
    : linear_enc(d, d_j, rng), linear_pred(d_p, d_j, rng), linear_out(d_j, out_dim, rng) {}

Tensor JointNetwork::all_pairs(const Tensor& h_enc, const Tensor& h_pred) const {
  const std::size_t frames = h_enc.dim(0);
  const std::size_t positions = h_pred.dim(0);
  Tensor a = linear_enc.forward(h_enc);    // [T x d_j]
  Tensor b = linear_pred.forward(h_pred);  // [U+1 x d_j]
  Tensor z = linear_out.forward(tanh(pairwise_sum(a, b)));
  return reshape(z, {frames, positions, linear_out.out_dim()});
}

Tensor JointNetwork::step(const Tensor& h_enc_row, const Tensor& h_pred_row) const {
  Tensor s = add(linear_enc.forward(h_enc_row), linear_pred.forward(h_pred_row));
  return linear_out.forward(tanh(s));
}

Tensor JointNetwork::ctc_logits(const Tensor& h_enc) const {
  return linear_out.forward(tanh(linear_enc.forward(h_enc)));
}

void JointNetwork::collect(const std::string& prefix, NamedParams& out) const {
  linear_enc.collect(prefix + ".linear_enc", out);
  linear_pred.collect(prefix + ".linear_pred", out);
  linear_out.collect(prefix + ".linear_out", out);
}

void TransducerHead::collect(const std::string& prefix, NamedParams& out) const {
  prediction.collect(prefix + ".prediction", out);
  joint.collect(prefix + ".joint", out);
}

HeadBank::HeadBank(Variant v, const VocabularySpec& vocab_spec, std::size_t d,
                   std::size_t d_p, std::size_t d_j, std::size_t lstm_layers, Rng& rng)
    : variant(v), vocab(&vocab_spec) {
  const std::size_t languages = vocab_spec.num_languages();
  if (variant == Variant::SPE) {
    for (std::size_t k = 0; k < languages; ++k) {
      TransducerHead head;
      // embedding rows: content + blank + EOS + start-of-sentence
      head.prediction = PredictionNetwork(vocab_spec.per_language[k].size() + 3, d_p,
                                          lstm_layers, rng);
      head.joint = JointNetwork(d, d_p, d_j, vocab_spec.output_dim(k), rng);
      heads.push_back(std::move(head));
    }
  } else {
    TransducerHead head;
    // embedding rows cover content, blank, EOS and the K LID start tokens
    head.prediction = PredictionNetwork(vocab_spec.merged_size() + 2 + languages, d_p,
                                        lstm_layers, rng);
    head.joint = JointNetwork(d, d_p, d_j, vocab_spec.merged_output_dim(), rng);
    heads.push_back(std::move(head));
  }
}

const TransducerHead& HeadBank::spe_select(std::size_t k) const {
  if (variant != Variant::SPE)
    throw std::invalid_argument("spe_select: head bank is UNI");
  if (k >= heads.size())
    throw std::invalid_argument("spe_select: target " + std::to_string(k) +
                                " out of range (" + std::to_string(heads.size()) +
                                " heads)");
  return heads[k];
}

int HeadBank::uni_start_token(std::size_t k) const {
  if (variant != Variant::UNI)
    throw std::invalid_argument("uni_start_token: head bank is SPE");
  if (k >= vocab->lid_token_ids.size())
    throw std::invalid_argument("uni_start_token: target out of range");
  return vocab->lid_token_ids[k];
}

const TransducerHead& HeadBank::head_for(std::size_t k) const {
  return variant == Variant::SPE ? spe_select(k) : heads.at(0);
}

int HeadBank::start_token(std::size_t k) const {
  if (variant == Variant::UNI) return uni_start_token(k);
  if (k >= vocab->num_languages())
    throw std::invalid_argument("start_token: target out of range");
  return vocab->eos_id(k) + 1;  // start-of-sentence row
}

int HeadBank::blank_id(std::size_t k) const {
  return variant == Variant::UNI ? vocab->merged_blank_id : vocab->blank_id(k);
}

int HeadBank::eos_id(std::size_t k) const {
  return variant == Variant::UNI ? vocab->merged_eos_id : vocab->eos_id(k);
}

void HeadBank::collect(const std::string& prefix, NamedParams& out) const {
  if (variant == Variant::SPE) {
    for (std::size_t k = 0; k < heads.size(); ++k)
      heads[k].collect(prefix + ".head" + std::to_string(k), out);
  } else {
    heads[0].collect(prefix + ".uni", out);
  }
}

}  // namespace lamassu
