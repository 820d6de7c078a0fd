#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "lamassu/config.hpp"
#include "lamassu/data.hpp"
#include "lamassu/encoder.hpp"
#include "lamassu/heads.hpp"
#include "lamassu/losses.hpp"
#include "lamassu/vocab.hpp"

namespace lamassu {

// Encoder plus head bank wired from a Config; owns the vocabulary derived
// from the toy language inventories.
struct Model {
  Config cfg;
  ToyLanguageSpec languages;
  VocabularySpec vocab;
  Encoder encoder;
  HeadBank heads;

  Model() = default;
  Model(const Config& config, const ToyLanguageSpec& langs);

  std::size_t num_targets() const { return vocab.num_languages(); }
  std::size_t num_clusters() const { return cfg.model.clusters; }

  NamedParams params() const;
  std::size_t parameter_count() const { return lamassu::parameter_count(params()); }

  // Maps an utterance's cluster index onto the encoder's cluster count.
  std::size_t encoder_cluster(std::size_t source_cluster) const {
    return source_cluster % cfg.model.clusters;
  }

  // Label ids under this variant (per-language ids for SPE, merged for UNI).
  std::vector<int> label_ids(std::size_t k, const std::vector<std::string>& tokens) const;
  std::string token_text(std::size_t k, int id) const;

  // LID augmentation (when enabled) + chunk mask + encoder forward.
  EncoderOutput encode(const Tensor& features, std::size_t k, const GateVector& gates,
                       ForwardCtx& ctx) const;

  struct UtteranceLosses {
    Tensor transducer;
    Tensor lid;   // defined when the encoder has > 1 cluster
    Tensor ctc;   // defined when CTC is enabled and the utterance fits
    bool ctc_skipped = false;
  };
  UtteranceLosses utterance_losses(const Utterance& utt, const Tensor& features,
                                   const GateVector& gates, ForwardCtx& ctx) const;

 private:
  std::vector<std::unordered_map<std::string, int>> token_to_lang_id_;  // per language
  int lang_token_id(std::size_t k, const std::string& token) const;
};

}  // namespace lamassu
