#pragma once

#include <map>
#include <string>
#include <vector>

#include "tplf/encoder.hpp"
#include "tplf/metrics.hpp"
#include "tplf/tokenizer.hpp"

namespace tplf {

// Surface strings per entity type, harvested from a labeled corpus.
struct EntityBank {
  std::map<std::string, std::vector<std::vector<std::string>>> surfaces;

  static EntityBank harvest(const NerDataset& ds);
  const std::vector<std::vector<std::string>>& of_type(const std::string& type) const;
};

// One original sentence plus V same-type entity-substitution variants.
struct PerturbedSet {
  NerSentence original;
  std::vector<NerSentence> variants;
};

// Every entity span is replaced by a uniformly sampled surface of the same
// type; labels are re-spanned to the replacement length. The original surface
// is excluded whenever the bank has another candidate of that type.
PerturbedSet perturb_entities(const NerSentence& sentence, const EntityBank& bank, int variants,
                              Rng& rng);

std::vector<PerturbedSet> perturb_dataset(const NerDataset& ds, const EntityBank& bank,
                                          int variants, uint64_t seed);

struct SimilarityStats {
  double mean = 0.0;
  int64_t pairs = 0;
  int64_t skipped = 0;
};

struct SimilarityPoint {
  int64_t step = 0;
  double value = 0.0;
};

// Fig-3a style curve data: (train step, mean cosine) with strictly
// increasing steps.
struct SimilarityCurve {
  std::vector<SimilarityPoint> points;

  void append(int64_t step, double value) {
    if (!points.empty() && step <= points.back().step)
      throw ConfigError("SimilarityCurve: steps must be strictly increasing");
    points.push_back({step, value});
  }
};

// Mean cosine between each original sentence and its perturbed variants,
// using mean-pooled text embeddings from one model snapshot.
template <class S>
SimilarityStats perturbation_similarity(EncoderParams<S>& params, const Tokenizer& tok,
                                        const std::vector<PerturbedSet>& sets,
                                        TaskPrimaryAdapterSet<S>* adapters = nullptr,
                                        std::optional<TaskId> task = std::nullopt) {
  SimilarityStats stats;
  double total = 0.0;
  for (const auto& set : sets) {
    std::vector<std::vector<std::string>> sents;
    sents.push_back(set.original.words);
    for (const auto& v : set.variants) sents.push_back(v.words);
    TokenBatch batch = tok.encode(sents, params.config.max_seq_len);
    Mat<S> tokens = encode_tokens_eval(batch, params, adapters, task);
    Mat<S> pooled = pool_mean(tokens, batch.attention_mask);
    for (Eigen::Index v = 1; v < pooled.rows(); ++v) {
      Mat<S> a = pooled.row(0), b = pooled.row(v);
      if (a.norm() <= S(kNormEps) || b.norm() <= S(kNormEps)) {
        ++stats.skipped;
        continue;
      }
      total += static_cast<double>(cosine_similarity(a, b));
      ++stats.pairs;
    }
  }
  if (stats.pairs > 0) stats.mean = total / static_cast<double>(stats.pairs);
  return stats;
}

// Mean pairwise cosine among word-level sub-token embeddings inside each
// sentence (cls/sep/pad excluded), then mean over sentences. Sentences with
// fewer than two usable tokens are skipped and counted.
template <class S>
SimilarityStats token_homogeneity(EncoderParams<S>& params, const Tokenizer& tok,
                                  const std::vector<std::vector<std::string>>& sentences,
                                  size_t n_samples,
                                  TaskPrimaryAdapterSet<S>* adapters = nullptr,
                                  std::optional<TaskId> task = std::nullopt) {
  SimilarityStats stats;
  double total = 0.0;
  size_t limit = std::min(n_samples, sentences.size());
  for (size_t i = 0; i < limit; ++i) {
    TokenBatch batch = tok.encode({sentences[i]}, params.config.max_seq_len);
    Mat<S> tokens = encode_tokens_eval(batch, params, adapters, task);
    std::vector<Eigen::Index> rows;
    for (auto [begin, end] : batch.word_alignment[0])
      for (int s = begin; s < end; ++s) rows.push_back(s);
    Mat<S> unit(static_cast<Eigen::Index>(rows.size()), tokens.cols());
    Eigen::Index used = 0;
    for (Eigen::Index r : rows) {
      S n = tokens.row(r).norm();
      if (n <= S(kNormEps)) continue;
      unit.row(used++) = tokens.row(r) / n;
    }
    if (used < 2) {
      ++stats.skipped;
      continue;
    }
    // mean over unordered pairs of dot products: (||sum||^2 - n) / (n(n-1))
    Eigen::Matrix<S, 1, Eigen::Dynamic> sum = unit.topRows(used).colwise().sum();
    double n = static_cast<double>(used);
    total += (static_cast<double>(sum.squaredNorm()) - n) / (n * (n - 1.0));
    ++stats.pairs;
  }
  if (stats.pairs > 0) stats.mean = total / static_cast<double>(stats.pairs);
  return stats;
}

}  // namespace tplf
