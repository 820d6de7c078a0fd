#include "lamassu/model.hpp"

#include <stdexcept>

namespace lamassu {

namespace {
constexpr std::uint64_t kInitStream = 0x1A17ull;
}

Model::Model(const Config& config, const ToyLanguageSpec& langs)
    : cfg(config), languages(langs) {
  vocab = merge_vocabularies(langs.target);
  const std::size_t targets = vocab.num_languages();

  Rng rng(Rng::mix(cfg.data.seed, kInitStream));
  const std::size_t in_dim =
      cfg.data.d_x + (cfg.model.target_lid_for_encoder ? targets : 0);
  encoder = Encoder(in_dim, cfg.model.d, cfg.model.heads, cfg.model.blocks,
                    cfg.model.clusters, cfg.model.separate_layers,
                    cfg.model.shared_layers, cfg.model.subsample, cfg.model.dropout, rng);
  heads = HeadBank(cfg.model.variant, vocab, cfg.model.d, cfg.model.d_p, cfg.model.d_j,
                   cfg.model.lstm_layers, rng);

  token_to_lang_id_.resize(targets);
  for (std::size_t k = 0; k < targets; ++k)
    for (std::size_t i = 0; i < vocab.per_language[k].size(); ++i)
      token_to_lang_id_[k][vocab.per_language[k][i]] = static_cast<int>(i);
}

NamedParams Model::params() const {
  NamedParams out;
  encoder.collect("encoder", out);
  heads.collect("heads", out);
  return out;
}

int Model::lang_token_id(std::size_t k, const std::string& token) const {
  const auto& map = token_to_lang_id_.at(k);
  auto it = map.find(token);
  if (it == map.end())
    throw std::invalid_argument("token '" + token + "' not in target language " +
                                std::to_string(k));
  return it->second;
}

std::vector<int> Model::label_ids(std::size_t k,
                                  const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& tok : tokens) {
    const int lang_id = lang_token_id(k, tok);
    ids.push_back(cfg.model.variant == Variant::UNI ? vocab.to_merged[k][lang_id]
                                                    : lang_id);
  }
  return ids;
}

std::string Model::token_text(std::size_t k, int id) const {
  if (cfg.model.variant == Variant::UNI) return vocab.merged_token(id);
  return vocab.per_language.at(k).at(std::size_t(id));
}

EncoderOutput Model::encode(const Tensor& features, std::size_t k,
                            const GateVector& gates, ForwardCtx& ctx) const {
  Tensor x = cfg.model.target_lid_for_encoder
                 ? augment_target_lid(features, k, num_targets())
                 : features;
  const std::size_t enc_frames = encoder.encoded_frames(x.dim(0));
  ChunkMask mask(cfg.model.chunk_frames, enc_frames);
  return encoder.forward(x, gates, mask, ctx);
}

Model::UtteranceLosses Model::utterance_losses(const Utterance& utt,
                                               const Tensor& features,
                                               const GateVector& gates,
                                               ForwardCtx& ctx) const {
  UtteranceLosses out;
  const std::size_t k = utt.target_lang;
  EncoderOutput enc = encode(features, k, gates, ctx);

  const TransducerHead& head = heads.head_for(k);
  const std::vector<int> labels = label_ids(k, utt.label_tokens);
  Tensor h_pred = head.prediction.forward_sequence(heads.start_token(k), labels);
  Tensor z = head.joint.all_pairs(enc.h_enc, h_pred);
  out.transducer = transducer_loss(z, labels, heads.blank_id(k));

  if (cfg.model.clusters > 1)
    out.lid = lid_loss(enc.lid_logit_sums, encoder_cluster(utt.source_cluster));

  if (cfg.loss.ctc) {
    try {
      out.ctc = ctc_loss(head.joint.ctc_logits(enc.h_enc), labels, heads.blank_id(k));
    } catch (const CtcTooShort&) {
      out.ctc_skipped = true;
    }
  }
  return out;
}

}  // namespace lamassu
