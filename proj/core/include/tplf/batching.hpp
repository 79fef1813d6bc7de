#pragma once

#include <vector>

#include "tplf/datasets.hpp"
#include "tplf/objectives.hpp"
#include "tplf/tokenizer.hpp"

namespace tplf {

// How word labels map onto sub-tokens. BIO training supervises the first
// sub-token of each word; cluster pseudo-labels are inherited by every
// sub-token of the word.
enum class SubtokenLabeling { kFirstSubtoken, kInheritAll };

inline TokenLabeledBatch make_token_labeled_batch(const std::vector<const NerSentence*>& sents,
                                                  const Tokenizer& tok, int max_seq_len,
                                                  const std::vector<std::string>& label_names,
                                                  SubtokenLabeling mode) {
  if (sents.empty()) throw DataError("make_token_labeled_batch: empty batch");
  std::vector<std::vector<std::string>> words;
  words.reserve(sents.size());
  for (const NerSentence* s : sents) words.push_back(s->words);

  TokenLabeledBatch out;
  out.tokens = tok.encode(words, max_seq_len);
  out.labels = MatI::Constant(out.tokens.batch(), out.tokens.seq_len(), kIgnoreLabel);
  auto id_of = [&](const std::string& tag) {
    auto it = std::find(label_names.begin(), label_names.end(), tag);
    if (it == label_names.end()) throw DataError("label set mismatch: tag '" + tag + "' not in head");
    return static_cast<int>(it - label_names.begin());
  };
  for (size_t b = 0; b < sents.size(); ++b) {
    const auto& alignment = out.tokens.word_alignment[b];
    for (size_t w = 0; w < alignment.size(); ++w) {
      int label = id_of(sents[b]->tags[w]);
      auto [begin, end] = alignment[w];
      if (mode == SubtokenLabeling::kFirstSubtoken) {
        out.labels(static_cast<Eigen::Index>(b), begin) = label;
      } else {
        for (int s = begin; s < end; ++s) out.labels(static_cast<Eigen::Index>(b), s) = label;
      }
    }
  }
  return out;
}

inline ContrastiveBatch make_contrastive_batch(const std::vector<const TextPair*>& pairs,
                                               const Tokenizer& tok, int max_seq_len) {
  if (pairs.empty()) throw DataError("make_contrastive_batch: empty batch");
  std::vector<std::vector<std::string>> anchors, positives;
  anchors.reserve(pairs.size());
  positives.reserve(pairs.size());
  for (const TextPair* p : pairs) {
    anchors.push_back(split_whitespace(p->anchor));
    positives.push_back(split_whitespace(p->positive));
  }
  ContrastiveBatch out;
  out.anchors = tok.encode(anchors, max_seq_len);
  out.positives = tok.encode(positives, max_seq_len);
  return out;
}

// Predicted word-level tags: argmax of the first sub-token's logits per word.
inline std::vector<std::vector<std::string>> decode_word_predictions(
    const Mat<float>& logits, const TokenBatch& tokens, const std::vector<std::string>& label_names) {
  const Eigen::Index seq = tokens.seq_len();
  std::vector<std::vector<std::string>> out(tokens.word_alignment.size());
  for (size_t b = 0; b < tokens.word_alignment.size(); ++b) {
    for (auto [begin, end] : tokens.word_alignment[b]) {
      Eigen::Index row = static_cast<Eigen::Index>(b) * seq + begin;
      Eigen::Index best;
      logits.row(row).maxCoeff(&best);
      out[b].push_back(label_names[static_cast<size_t>(best)]);
    }
  }
  return out;
}

}  // namespace tplf
