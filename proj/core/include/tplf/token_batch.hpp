#pragma once

#include <utility>
#include <vector>

#include "tplf/common.hpp"

namespace tplf {

// A padded batch of sub-token sequences. word_alignment maps each word of the
// original sentence to its contiguous [begin, end) sub-token range, so word
// embeddings can be recovered by averaging sub-token rows.
struct TokenBatch {
  MatI token_ids;       // batch x seq
  MatI attention_mask;  // batch x seq, 1s-prefix then 0s (right padding)
  std::vector<std::vector<std::pair<int, int>>> word_alignment;

  Eigen::Index batch() const { return token_ids.rows(); }
  Eigen::Index seq_len() const { return token_ids.cols(); }

  void validate(int vocab_size) const;
};

inline void TokenBatch::validate(int vocab_size) const {
  if (attention_mask.rows() != token_ids.rows() || attention_mask.cols() != token_ids.cols())
    throw ConfigError("TokenBatch: mask shape differs from token_ids");
  for (Eigen::Index b = 0; b < batch(); ++b) {
    bool seen_pad = false;
    for (Eigen::Index s = 0; s < seq_len(); ++s) {
      int m = attention_mask(b, s);
      if (m != 0 && m != 1) throw ConfigError("TokenBatch: mask entries must be 0/1");
      if (m == 0) seen_pad = true;
      if (m == 1 && seen_pad) throw ConfigError("TokenBatch: mask must be a 1s-prefix (right padding)");
      int id = token_ids(b, s);
      if (id < 0 || id >= vocab_size)
        throw ConfigError("TokenBatch: token id " + std::to_string(id) + " out of vocabulary");
    }
  }
  if (!word_alignment.empty()) {
    if (static_cast<Eigen::Index>(word_alignment.size()) != batch())
      throw ConfigError("TokenBatch: word_alignment size differs from batch");
    for (Eigen::Index b = 0; b < batch(); ++b) {
      for (auto [begin, end] : word_alignment[static_cast<size_t>(b)]) {
        if (begin >= end) throw ConfigError("TokenBatch: empty word alignment range");
        if (begin < 0 || end > seq_len() || attention_mask(b, end - 1) == 0)
          throw ConfigError("TokenBatch: word alignment range outside masked region");
      }
    }
  }
}

}  // namespace tplf
