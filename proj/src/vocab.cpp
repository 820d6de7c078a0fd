#include "lamassu/vocab.hpp"

#include <fstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace lamassu {

bool VocabularySpec::in_language(int merged_id, std::size_t k) const {
  for (int id : to_merged.at(k))
    if (id == merged_id) return true;
  return false;
}

VocabularySpec merge_vocabularies(std::vector<std::vector<std::string>> per_language) {
  if (per_language.empty())
    throw std::invalid_argument("merge_vocabularies: no languages given");
  VocabularySpec spec;
  spec.per_language = std::move(per_language);

  std::unordered_map<std::string, int> index;
  for (std::size_t k = 0; k < spec.per_language.size(); ++k) {
    const auto& tokens = spec.per_language[k];
    if (tokens.empty())
      throw std::invalid_argument("merge_vocabularies: language " + std::to_string(k) +
                                  " has an empty inventory");
    std::unordered_set<std::string> seen;
    std::vector<int> remap;
    remap.reserve(tokens.size());
    for (const auto& tok : tokens) {
      if (!seen.insert(tok).second)
        throw std::invalid_argument("merge_vocabularies: duplicate token '" + tok +
                                    "' within language " + std::to_string(k));
      auto it = index.find(tok);
      if (it == index.end()) {
        it = index.emplace(tok, static_cast<int>(spec.merged.size())).first;
        spec.merged.push_back(tok);
      }
      remap.push_back(it->second);
    }
    spec.to_merged.push_back(std::move(remap));
  }

  spec.merged_blank_id = static_cast<int>(spec.merged.size());
  spec.merged_eos_id = spec.merged_blank_id + 1;
  for (std::size_t k = 0; k < spec.per_language.size(); ++k)
    spec.lid_token_ids.push_back(spec.merged_eos_id + 1 + static_cast<int>(k));
  return spec;
}

void write_vocabulary_file(const std::string& path, const std::vector<std::string>& tokens) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocabulary file '" + path + "'");
  for (const auto& tok : tokens) out << tok << "\n";
}

std::vector<std::string> read_vocabulary_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read vocabulary file '" + path + "'");
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return tokens;
}

}  // namespace lamassu
