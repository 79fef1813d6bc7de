#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tplf/token_batch.hpp"

namespace tplf {

// Corpus-derived word vocabulary with a character-level fallback for OOV
// words. Words below the frequency cutoff are spelled out character by
// character; characters never seen in the corpus map to unk.
class Tokenizer {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;

  static Tokenizer build(const std::vector<std::vector<std::string>>& corpus, int min_count = 1);

  int vocab_size() const { return next_id_; }
  bool has_word(const std::string& w) const { return word_ids_.count(w) != 0; }

  // Sub-token ids for one word (no specials). Size >= 1.
  std::vector<int> word_to_ids(const std::string& word) const;

  // [cls] words... [sep], padded to the longest sequence in the batch and
  // truncated at word boundaries to max_seq_len. Alignment covers the words
  // that survived truncation.
  TokenBatch encode(const std::vector<std::vector<std::string>>& sentences, int max_seq_len) const;

  nlohmann::json to_json() const;
  static Tokenizer from_json(const nlohmann::json& j);

 private:
  std::unordered_map<std::string, int> word_ids_;
  std::unordered_map<std::string, int> char_ids_;  // single-character fallback tokens
  int next_id_ = 4;
};

}  // namespace tplf
