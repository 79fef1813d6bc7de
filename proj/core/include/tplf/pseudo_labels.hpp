#pragma once

#include <string>
#include <vector>

#include "tplf/batching.hpp"
#include "tplf/encoder.hpp"
#include "tplf/kmeans.hpp"

namespace tplf {

struct PseudoLabelConfig {
  KmeansConfig kmeans;     // kmeans.k is the cluster-ID label count
  int batch_sentences = 64;  // teacher forward batch
  uint64_t seed = 0;

  void validate() const {
    kmeans.validate();
    if (kmeans.k < 2) throw ConfigError("PseudoLabelConfig: k must be >= 2");
    if (kmeans.batch_size < kmeans.k)
      throw ConfigError("PseudoLabelConfig: kmeans batch must be >= k");
    if (batch_sentences < 1) throw ConfigError("PseudoLabelConfig: batch_sentences must be >= 1");
  }
};

// Mean of each word's sub-token embedding rows. tokens: (batch*seq) x H.
template <class S>
Mat<S> word_embeddings_from_subtokens(const Mat<S>& token_embeddings, const TokenBatch& batch) {
  const Eigen::Index seq = batch.seq_len();
  Eigen::Index total_words = 0;
  for (const auto& a : batch.word_alignment) total_words += static_cast<Eigen::Index>(a.size());
  Mat<S> out(total_words, token_embeddings.cols());
  Eigen::Index row = 0;
  for (size_t b = 0; b < batch.word_alignment.size(); ++b) {
    for (auto [begin, end] : batch.word_alignment[b]) {
      if (begin >= end) throw ConfigError("word_embeddings_from_subtokens: empty range");
      out.row(row).setZero();
      for (int s = begin; s < end; ++s)
        out.row(row) += token_embeddings.row(static_cast<Eigen::Index>(b) * seq + s);
      out.row(row) /= static_cast<S>(end - begin);
      ++row;
    }
  }
  return out;
}

// Frozen-teacher word embeddings for a whole corpus, processed in sentence
// batches. Returns one row per aligned word, in corpus order, and records how
// many words each sentence contributed.
template <class S>
Mat<S> extract_word_embeddings(const std::vector<std::vector<std::string>>& sentences,
                               EncoderParams<S>& teacher, const Tokenizer& tok,
                               int batch_sentences, std::vector<int>* words_per_sentence = nullptr) {
  std::vector<Mat<S>> chunks;
  Eigen::Index total = 0;
  for (size_t start = 0; start < sentences.size(); start += static_cast<size_t>(batch_sentences)) {
    size_t stop = std::min(sentences.size(), start + static_cast<size_t>(batch_sentences));
    std::vector<std::vector<std::string>> slice(sentences.begin() + static_cast<long>(start),
                                                sentences.begin() + static_cast<long>(stop));
    TokenBatch batch = tok.encode(slice, teacher.config.max_seq_len);
    Mat<S> tokens = encode_tokens_eval(batch, teacher);
    chunks.push_back(word_embeddings_from_subtokens(tokens, batch));
    total += chunks.back().rows();
    if (words_per_sentence)
      for (const auto& a : batch.word_alignment)
        words_per_sentence->push_back(static_cast<int>(a.size()));
  }
  Mat<S> out(total, chunks.empty() ? 0 : chunks.front().cols());
  Eigen::Index row = 0;
  for (const auto& c : chunks) {
    out.middleRows(row, c.rows()) = c;
    row += c.rows();
  }
  return out;
}

// The NER pre-finetuning dataset: cluster frozen-teacher word embeddings and
// tag every word with its cluster ID. Words lost to max_seq_len truncation
// have no embedding, so the emitted sentence is truncated with them.
template <class S>
NerDataset build_pseudo_dataset(const std::vector<std::vector<std::string>>& corpus,
                                EncoderParams<S>& teacher, const Tokenizer& tok,
                                const PseudoLabelConfig& cfg,
                                ClusterModel<S>* model_out = nullptr) {
  cfg.validate();
  std::vector<int> words_per_sentence;
  Mat<S> words = extract_word_embeddings(corpus, teacher, tok, cfg.batch_sentences, &words_per_sentence);
  if (words.rows() < cfg.kmeans.k)
    throw DataError("build_pseudo_dataset: corpus yields fewer words than clusters");

  KmeansConfig kc = cfg.kmeans;
  kc.seed = cfg.seed;
  ClusterModel<S> model = minibatch_kmeans(words, kc);
  std::vector<int> labels = assign_clusters(model, words);

  NerDataset out;
  out.scheme = TagScheme::kCluster;
  size_t word_idx = 0;
  for (size_t i = 0; i < corpus.size(); ++i) {
    NerSentence s;
    int aligned = words_per_sentence[i];
    for (int w = 0; w < aligned; ++w) {
      s.words.push_back(corpus[i][static_cast<size_t>(w)]);
      s.tags.push_back("C" + std::to_string(labels[word_idx + static_cast<size_t>(w)]));
    }
    word_idx += static_cast<size_t>(aligned);
    if (!s.words.empty()) out.sentences.push_back(std::move(s));
  }
  for (int c = 0; c < cfg.kmeans.k; ++c) out.label_names.push_back("C" + std::to_string(c));
  if (model_out) *model_out = std::move(model);
  return out;
}

}  // namespace tplf
