#pragma once

#include <string>
#include <vector>

#include "tplf/common.hpp"

namespace tplf {

// Word-level sentence with one tag per word. Tags are either a BIO scheme
// (O / B-X / I-X) or cluster pseudo-labels (C0, C1, ...).
struct NerSentence {
  std::vector<std::string> words;
  std::vector<std::string> tags;
};

enum class TagScheme { kBio, kCluster };

struct NerDataset {
  std::vector<NerSentence> sentences;
  TagScheme scheme = TagScheme::kBio;
  std::vector<std::string> label_names;  // tag vocabulary in first-seen order

  int label_id(const std::string& tag) const;
  uint64_t content_hash() const;
};

struct TextPair {
  std::string anchor;
  std::string positive;
};

struct PairDataset {
  std::vector<TextPair> pairs;

  uint64_t content_hash() const;
};

struct LabeledText {
  std::string text;
  std::string label;
};

struct LabeledTextDataset {
  std::vector<LabeledText> items;
  std::vector<std::string> label_names;

  int label_id(const std::string& label) const;
  uint64_t content_hash() const;
};

// CoNLL column format: token in the first column, tag in the last, blank
// line between sentences, -DOCSTART- lines skipped.
NerDataset load_conll(const std::string& path);
void save_conll(const NerDataset& ds, const std::string& path);

// JSONL objects with "anchor"/"positive" fields, or 2-column TSV.
PairDataset load_pairs(const std::string& path);
void save_pairs_jsonl(const PairDataset& ds, const std::string& path);
void save_pairs_tsv(const PairDataset& ds, const std::string& path);

// JSONL objects with "text"/"label" fields, or 2-column TSV.
LabeledTextDataset load_labeled_texts(const std::string& path);
void save_labeled_texts_jsonl(const LabeledTextDataset& ds, const std::string& path);

std::vector<std::string> split_whitespace(const std::string& text);

}  // namespace tplf
