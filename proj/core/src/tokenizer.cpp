#include "tplf/tokenizer.hpp"

#include <algorithm>
#include <map>

#include <nlohmann/json.hpp>

namespace tplf {

Tokenizer Tokenizer::build(const std::vector<std::vector<std::string>>& corpus, int min_count) {
  if (min_count < 1) throw ConfigError("Tokenizer: min_count must be >= 1");
  // std::map keeps id assignment independent of hash order.
  std::map<std::string, int> word_freq;
  std::map<std::string, int> chars;
  for (const auto& sent : corpus) {
    for (const auto& w : sent) {
      if (w.empty()) throw DataError("Tokenizer: empty word in corpus");
      ++word_freq[w];
      for (char c : w) chars.emplace(std::string(1, c), 0);
    }
  }
  Tokenizer t;
  for (const auto& [w, n] : word_freq)
    if (n >= min_count) t.word_ids_.emplace(w, t.next_id_++);
  for (const auto& [c, unused] : chars) t.char_ids_.emplace(c, t.next_id_++);
  return t;
}

std::vector<int> Tokenizer::word_to_ids(const std::string& word) const {
  auto it = word_ids_.find(word);
  if (it != word_ids_.end()) return {it->second};
  std::vector<int> ids;
  ids.reserve(word.size());
  for (char c : word) {
    auto ct = char_ids_.find(std::string(1, c));
    ids.push_back(ct != char_ids_.end() ? ct->second : kUnk);
  }
  if (ids.empty()) ids.push_back(kUnk);
  return ids;
}

TokenBatch Tokenizer::encode(const std::vector<std::vector<std::string>>& sentences,
                             int max_seq_len) const {
  if (sentences.empty()) throw DataError("Tokenizer::encode: empty batch");
  if (max_seq_len < 3) throw ConfigError("Tokenizer::encode: max_seq_len must fit cls+token+sep");

  struct Encoded {
    std::vector<int> ids;
    std::vector<std::pair<int, int>> alignment;
  };
  std::vector<Encoded> rows;
  rows.reserve(sentences.size());
  Eigen::Index longest = 0;
  for (const auto& sent : sentences) {
    Encoded e;
    e.ids.push_back(kCls);
    for (const auto& w : sent) {
      auto ids = word_to_ids(w);
      // truncate at word boundaries, always leaving room for [sep]
      if (static_cast<int>(e.ids.size() + ids.size()) + 1 > max_seq_len) break;
      int begin = static_cast<int>(e.ids.size());
      e.ids.insert(e.ids.end(), ids.begin(), ids.end());
      e.alignment.emplace_back(begin, static_cast<int>(e.ids.size()));
    }
    e.ids.push_back(kSep);
    longest = std::max(longest, static_cast<Eigen::Index>(e.ids.size()));
    rows.push_back(std::move(e));
  }

  TokenBatch batch;
  batch.token_ids = MatI::Constant(static_cast<Eigen::Index>(rows.size()), longest, kPad);
  batch.attention_mask = MatI::Zero(static_cast<Eigen::Index>(rows.size()), longest);
  for (size_t b = 0; b < rows.size(); ++b) {
    for (size_t s = 0; s < rows[b].ids.size(); ++s) {
      batch.token_ids(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(s)) = rows[b].ids[s];
      batch.attention_mask(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(s)) = 1;
    }
    batch.word_alignment.push_back(std::move(rows[b].alignment));
  }
  return batch;
}

nlohmann::json Tokenizer::to_json() const {
  nlohmann::json j;
  j["words"] = word_ids_;
  j["chars"] = char_ids_;
  j["next_id"] = next_id_;
  return j;
}

Tokenizer Tokenizer::from_json(const nlohmann::json& j) {
  Tokenizer t;
  t.word_ids_ = j.at("words").get<std::unordered_map<std::string, int>>();
  t.char_ids_ = j.at("chars").get<std::unordered_map<std::string, int>>();
  t.next_id_ = j.at("next_id").get<int>();
  return t;
}

}  // namespace tplf
