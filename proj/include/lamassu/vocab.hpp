#pragma once

#include <string>
#include <vector>

#include "lamassu/config.hpp"

namespace lamassu {

// Token inventories for the transducer heads. Content ids come first; blank
// and EOS are appended after them. For the merged (unified) vocabulary, one
// LID start token per target language follows blank/EOS; LID tokens are fed
// to the prediction network but are never valid outputs (the joint output
// dimension stops at EOS).
struct VocabularySpec {
  std::vector<std::vector<std::string>> per_language;  // K content token lists
  std::vector<std::string> merged;                     // deduplicated union, first-seen order
  std::vector<std::vector<int>> to_merged;  // [k][in-language id] -> merged id

  int merged_blank_id = -1;
  int merged_eos_id = -1;
  std::vector<int> lid_token_ids;  // K ids, after blank/EOS

  std::size_t num_languages() const { return per_language.size(); }
  std::size_t merged_size() const { return merged.size(); }
  // Per-language inventory helpers (SPE heads).
  int blank_id(std::size_t k) const { return static_cast<int>(per_language[k].size()); }
  int eos_id(std::size_t k) const { return static_cast<int>(per_language[k].size()) + 1; }
  // Joint output dimension: content + blank + EOS.
  std::size_t output_dim(std::size_t k) const { return per_language[k].size() + 2; }
  std::size_t merged_output_dim() const { return merged.size() + 2; }

  const std::string& merged_token(int id) const { return merged.at(std::size_t(id)); }
  // True when `merged_id` names a content token of language k.
  bool in_language(int merged_id, std::size_t k) const;
};

// Deduplicates the per-language inventories into a merged list with stable
// first-seen ordering, builds the per-language remap tables, and appends the
// K LID start tokens. A duplicate inside a single language list is an error.
VocabularySpec merge_vocabularies(std::vector<std::vector<std::string>> per_language);

// One token per line, UTF-8; line number == in-language id.
void write_vocabulary_file(const std::string& path, const std::vector<std::string>& tokens);
std::vector<std::string> read_vocabulary_file(const std::string& path);

}  // namespace lamassu
