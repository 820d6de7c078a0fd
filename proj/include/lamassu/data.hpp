#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lamassu/config.hpp"
#include "lamassu/tensor.hpp"

namespace lamassu {

// Synthetic 2-source x 3-target corpus. Source alphabets are disjoint, so the
// source cluster is always recoverable from the tokens themselves; the first
// two target alphabets overlap to exercise vocabulary merging. Each
// (source, target) direction composes a fixed bijective token map with a
// per-target sequence transform: target 0 keeps order, target 1 reverses,
// target 2 swaps adjacent pairs — so the three outputs for any source of
// length >= 2 are pairwise distinct and target conditioning is required.
struct ToyLanguageSpec {
  static constexpr std::size_t kSources = 2;
  static constexpr std::size_t kTargets = 3;

  std::vector<std::vector<std::string>> source;  // [2][tokens_per_lang]
  std::vector<std::vector<std::string>> target;  // [3][tokens_per_lang]
  // token_map[j][k][source index] -> target index
  std::vector<std::vector<std::vector<std::size_t>>> token_map;

  static ToyLanguageSpec make(const DataConfig& cfg);

  std::vector<std::string> apply_rule(std::size_t j, std::size_t k,
                                      const std::vector<std::string>& src_tokens) const;
  // Cluster whose alphabet contains the token; throws on unknown tokens.
  std::size_t source_cluster_of(const std::string& token) const;
  std::size_t source_index_of(std::size_t j, const std::string& token) const;
};

struct Utterance {
  std::uint64_t id = 0;
  std::size_t source_cluster = 0;  // j
  std::size_t target_lang = 0;     // k
  std::vector<std::string> source_tokens;
  std::vector<std::string> label_tokens;
};

enum class Split { Train, Dev, Test };
std::string split_name(Split s);

struct Corpus {
  std::vector<Utterance> utterances;
  ToyLanguageSpec languages;
  DataConfig config;
};

// Deterministic per-token feature codebook entry (d_x Gaussian values seeded
// from the token text alone).
std::vector<float> codebook_vector(const std::string& token, std::size_t d_x);

// Token sequence -> frames: each occurrence spans span_min..span_max frames
// of its codebook vector plus N(0, sigma^2) noise, all drawn from utt_seed.
Tensor featurize(const std::vector<std::string>& tokens, const DataConfig& cfg,
                 std::uint64_t utt_seed);

std::uint64_t utterance_seed(const DataConfig& cfg, std::uint64_t id);

// Round-robin over the six (source, target) directions; utterance ids are
// partitioned by split so the three splits never share a random stream.
Corpus generate_corpus(const DataConfig& cfg, std::size_t n_utts, Split split);

// Corpus files: '#'-prefixed header lines with the data parameters, then one
// record per line: id, j, k, source tokens, label tokens (tab-separated,
// tokens space-separated).
void write_corpus_file(const std::string& path, const Corpus& corpus);
Corpus load_corpus_file(const std::string& path);

}  // namespace lamassu
