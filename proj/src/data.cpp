#include "lamassu/data.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lamassu {

namespace {

std::string pad2(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%02zu", i);
  return buf;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

std::vector<std::size_t> fixed_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_u32(i)]);
  return perm;
}

constexpr std::uint64_t kRuleSeed = 0x52554C45ull;      // token-map permutations
constexpr std::uint64_t kDrawStream = 0x70C5ull;        // source token draws
constexpr std::uint64_t kFeatureStream = 0xFEA7ull;     // spans and noise

}  // namespace

std::string split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    default: return "test";
  }
}

ToyLanguageSpec ToyLanguageSpec::make(const DataConfig& cfg) {
  const std::size_t n = cfg.tokens_per_lang;
  if (n < 2) throw std::invalid_argument("ToyLanguageSpec: tokens_per_lang must be >= 2");
  if (cfg.overlap > n)
    throw std::invalid_argument("ToyLanguageSpec: overlap exceeds tokens_per_lang");

  ToyLanguageSpec spec;
  spec.source.resize(kSources);
  for (std::size_t j = 0; j < kSources; ++j)
    for (std::size_t i = 0; i < n; ++i)
      spec.source[j].push_back("s" + std::to_string(j) + "_" + pad2(i));

  spec.target.resize(kTargets);
  // targets 0 and 1 share the first `overlap` tokens
  for (std::size_t i = 0; i < n; ++i) {
    spec.target[0].push_back(i < cfg.overlap ? "tc_" + pad2(i) : "t0_" + pad2(i));
    spec.target[1].push_back(i < cfg.overlap ? "tc_" + pad2(i) : "t1_" + pad2(i));
    spec.target[2].push_back("t2_" + pad2(i));
  }

  spec.token_map.resize(kSources);
  for (std::size_t j = 0; j < kSources; ++j) {
    spec.token_map[j].resize(kTargets);
    for (std::size_t k = 0; k < kTargets; ++k)
      spec.token_map[j][k] = fixed_permutation(n, Rng::mix(kRuleSeed, j * kTargets + k));
  }
  return spec;
}

std::vector<std::string> ToyLanguageSpec::apply_rule(
    std::size_t j, std::size_t k, const std::vector<std::string>& src_tokens) const {
  if (j >= kSources || k >= kTargets)
    throw std::invalid_argument("apply_rule: direction out of range");
  std::vector<std::string> mapped;
  mapped.reserve(src_tokens.size());
  for (const auto& tok : src_tokens)
    mapped.push_back(target[k][token_map[j][k][source_index_of(j, tok)]]);
  switch (k) {
    case 0: break;  // keep order
    case 1: std::reverse(mapped.begin(), mapped.end()); break;
    default:
      for (std::size_t i = 0; i + 1 < mapped.size(); i += 2)
        std::swap(mapped[i], mapped[i + 1]);
      break;
  }
  return mapped;
}

std::size_t ToyLanguageSpec::source_cluster_of(const std::string& token) const {
  for (std::size_t j = 0; j < kSources; ++j)
    for (const auto& tok : source[j])
      if (tok == token) return j;
  throw std::invalid_argument("source_cluster_of: unknown token '" + token + "'");
}

std::size_t ToyLanguageSpec::source_index_of(std::size_t j, const std::string& token) const {
  const auto& list = source.at(j);
  for (std::size_t i = 0; i < list.size(); ++i)
    if (list[i] == token) return i;
  throw std::invalid_argument("source_index_of: token '" + token +
                              "' not in source language " + std::to_string(j));
}

std::vector<float> codebook_vector(const std::string& token, std::size_t d_x) {
  Rng rng(fnv1a64(token));
  std::vector<float> v(d_x);
  for (auto& x : v) x = rng.gaussian();
  return v;
}

std::uint64_t utterance_seed(const DataConfig& cfg, std::uint64_t id) {
  return Rng::mix(cfg.seed, id);
}

Tensor featurize(const std::vector<std::string>& tokens, const DataConfig& cfg,
                 std::uint64_t utt_seed) {
  if (cfg.span_min < 1 || cfg.span_max < cfg.span_min)
    throw std::invalid_argument("featurize: invalid span range");
  Rng rng(Rng::mix(utt_seed, kFeatureStream));
  std::vector<float> frames;
  std::size_t count = 0;
  for (const auto& tok : tokens) {
    const auto code = codebook_vector(tok, cfg.d_x);
    const std::size_t span =
        cfg.span_min + rng.uniform_u32(static_cast<std::uint32_t>(cfg.span_max - cfg.span_min + 1));
    for (std::size_t s = 0; s < span; ++s) {
      for (std::size_t i = 0; i < cfg.d_x; ++i)
        frames.push_back(code[i] + cfg.sigma * rng.gaussian());
      ++count;
    }
  }
  return Tensor::from({count, cfg.d_x}, std::move(frames));
}

Corpus generate_corpus(const DataConfig& cfg, std::size_t n_utts, Split split) {
  if (n_utts < 1) throw std::invalid_argument("generate_corpus: n_utts must be >= 1");
  if (cfg.len_min < 1 || cfg.len_max < cfg.len_min)
    throw std::invalid_argument("generate_corpus: invalid length range");

  Corpus corpus;
  corpus.config = cfg;
  corpus.languages = ToyLanguageSpec::make(cfg);
  corpus.utterances.reserve(n_utts);

  const std::uint64_t split_base = static_cast<std::uint64_t>(split) << 32;
  const std::size_t directions = ToyLanguageSpec::kSources * ToyLanguageSpec::kTargets;
  for (std::size_t i = 0; i < n_utts; ++i) {
    Utterance utt;
    utt.id = split_base + i;
    const std::size_t dir = i % directions;
    utt.source_cluster = dir / ToyLanguageSpec::kTargets;
    utt.target_lang = dir % ToyLanguageSpec::kTargets;

    Rng rng(Rng::mix(utterance_seed(cfg, utt.id), kDrawStream));
    const std::size_t len =
        cfg.len_min + rng.uniform_u32(static_cast<std::uint32_t>(cfg.len_max - cfg.len_min + 1));
    const auto& alphabet = corpus.languages.source[utt.source_cluster];
    for (std::size_t p = 0; p < len; ++p)
      utt.source_tokens.push_back(alphabet[rng.uniform_u32(static_cast<std::uint32_t>(alphabet.size()))]);
    utt.label_tokens =
        corpus.languages.apply_rule(utt.source_cluster, utt.target_lang, utt.source_tokens);
    corpus.utterances.push_back(std::move(utt));
  }
  return corpus;
}

void write_corpus_file(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write corpus file '" + path + "'");
  const DataConfig& cfg = corpus.config;
  char sigma[32];
  std::snprintf(sigma, sizeof(sigma), "%.9g", double(cfg.sigma));
  out << "#lamassu-corpus v1\n";
  out << "#seed " << cfg.seed << "\n";
  out << "#d_x " << cfg.d_x << "\n";
  out << "#sigma " << sigma << "\n";
  out << "#span_min " << cfg.span_min << "\n";
  out << "#span_max " << cfg.span_max << "\n";
  out << "#len_min " << cfg.len_min << "\n";
  out << "#len_max " << cfg.len_max << "\n";
  out << "#tokens_per_lang " << cfg.tokens_per_lang << "\n";
  out << "#overlap " << cfg.overlap << "\n";
  for (const auto& utt : corpus.utterances) {
    out << utt.id << "\t" << utt.source_cluster << "\t" << utt.target_lang << "\t";
    for (std::size_t i = 0; i < utt.source_tokens.size(); ++i)
      out << (i ? " " : "") << utt.source_tokens[i];
    out << "\t";
    for (std::size_t i = 0; i < utt.label_tokens.size(); ++i)
      out << (i ? " " : "") << utt.label_tokens[i];
    out << "\n";
  }
}

namespace {

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

}  // namespace

Corpus load_corpus_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read corpus file '" + path + "'");
  Corpus corpus;
  DataConfig cfg;
  std::string line;
  bool got_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream is(line.substr(1));
      std::string key;
      is >> key;
      if (key == "lamassu-corpus") {
        got_header = true;
      } else if (key == "seed") {
        is >> cfg.seed;
      } else if (key == "d_x") {
        is >> cfg.d_x;
      } else if (key == "sigma") {
        is >> cfg.sigma;
      } else if (key == "span_min") {
        is >> cfg.span_min;
      } else if (key == "span_max") {
        is >> cfg.span_max;
      } else if (key == "len_min") {
        is >> cfg.len_min;
      } else if (key == "len_max") {
        is >> cfg.len_max;
      } else if (key == "tokens_per_lang") {
        is >> cfg.tokens_per_lang;
      } else if (key == "overlap") {
        is >> cfg.overlap;
      }
      continue;
    }
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 5)
      throw std::runtime_error("corpus record has " + std::to_string(fields.size()) +
                               " fields, expected 5: " + line);
    Utterance utt;
    utt.id = std::stoull(fields[0]);
    utt.source_tokens = split_ws(fields[3]);
    utt.label_tokens = split_ws(fields[4]);
    if (corpus.languages.source.empty()) corpus.languages = ToyLanguageSpec::make(cfg);
    // The cluster field may be blank; the alphabet determines it anyway.
    if (fields[1].empty() || fields[1] == "-") {
      utt.source_cluster = utt.source_tokens.empty()
                               ? 0
                               : corpus.languages.source_cluster_of(utt.source_tokens[0]);
    } else {
      utt.source_cluster = std::stoul(fields[1]);
    }
    utt.target_lang = std::stoul(fields[2]);
    corpus.utterances.push_back(std::move(utt));
  }
  if (!got_header) throw std::runtime_error("'" + path + "' is not a corpus file");
  corpus.config = cfg;
  if (corpus.languages.source.empty()) corpus.languages = ToyLanguageSpec::make(cfg);
  return corpus;
}

}  // namespace lamassu
