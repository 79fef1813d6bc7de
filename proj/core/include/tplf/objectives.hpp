#pragma once

#include <numeric>
#include <vector>

#include "tplf/encoder.hpp"
#include "tplf/graph.hpp"

namespace tplf {

struct ContrastiveConfig {
  double temperature = 0.05;

  void validate() const {
    if (temperature <= 0.0) throw ConfigError("ContrastiveConfig: temperature must be > 0");
  }
};

// Anchor/positive text pairs, aligned one-to-one.
struct ContrastiveBatch {
  TokenBatch anchors;
  TokenBatch positives;

  Eigen::Index size() const { return anchors.batch(); }

  void validate(int vocab_size) const {
    anchors.validate(vocab_size);
    positives.validate(vocab_size);
    if (anchors.batch() != positives.batch())
      throw ConfigError("ContrastiveBatch: anchors and positives must align");
  }
};

// Token sequences with gold or pseudo labels; kIgnoreLabel marks positions
// outside supervision (padding, specials, continuation sub-tokens).
struct TokenLabeledBatch {
  TokenBatch tokens;
  MatI labels;  // batch x seq

  void validate(int vocab_size, int num_classes) const {
    tokens.validate(vocab_size);
    if (labels.rows() != tokens.batch() || labels.cols() != tokens.seq_len())
      throw ConfigError("TokenLabeledBatch: labels shape differs from tokens");
    for (Eigen::Index b = 0; b < labels.rows(); ++b)
      for (Eigen::Index s = 0; s < labels.cols(); ++s) {
        int lab = labels(b, s);
        if (lab == kIgnoreLabel) continue;
        if (lab < 0 || lab >= num_classes)
          throw ConfigError("TokenLabeledBatch: label " + std::to_string(lab) + " out of range");
        if (tokens.attention_mask(b, s) == 0)
          throw ConfigError("TokenLabeledBatch: supervised label on a padded position");
      }
  }

  std::vector<int> flat_labels() const {
    std::vector<int> out(static_cast<size_t>(labels.size()));
    for (Eigen::Index b = 0; b < labels.rows(); ++b)
      for (Eigen::Index s = 0; s < labels.cols(); ++s)
        out[static_cast<size_t>(b * labels.cols() + s)] = labels(b, s);
    return out;
  }
};

// InfoNCE with in-batch negatives: the denominator for anchor i runs over all
// positives z_j+ in the batch, the positive itself included. Inputs must be
// L2-normalized; rows off by more than 1e-3 trigger a warning and are
// renormalized in-graph.
template <class S>
typename Graph<S>::Var info_nce(Graph<S>& g, typename Graph<S>::Var z,
                                typename Graph<S>::Var z_plus, double temperature) {
  if (temperature <= 0.0) throw ConfigError("info_nce: temperature must be > 0");
  const Eigen::Index batch = g.value(z).rows();
  if (batch == 0) throw ConfigError("info_nce: empty batch");
  if (g.value(z_plus).rows() != batch) throw ConfigError("info_nce: z/z_plus must align");

  auto off_unit = [&](typename Graph<S>::Var v) {
    for (Eigen::Index r = 0; r < g.value(v).rows(); ++r)
      if (std::abs(static_cast<double>(g.value(v).row(r).norm()) - 1.0) > 1e-3) return true;
    return false;
  };
  if (off_unit(z) || off_unit(z_plus)) {
    warn("info_nce: embeddings deviate from unit norm, renormalizing");
    z = g.l2_normalize_rows(z);
    z_plus = g.l2_normalize_rows(z_plus);
  }

  auto sims = g.scale(g.matmul_t(z, z_plus), S(1.0 / temperature));
  std::vector<int> diagonal(static_cast<size_t>(batch));
  std::iota(diagonal.begin(), diagonal.end(), 0);
  return g.cross_entropy_rows(sims, diagonal);
}

// Mean token-level cross-entropy over non-ignored positions.
template <class S>
typename Graph<S>::Var token_cross_entropy(Graph<S>& g, typename Graph<S>::Var logits,
                                           const std::vector<int>& labels,
                                           int ignore_label = kIgnoreLabel) {
  if (g.value(logits).cols() < 2) throw ConfigError("token_cross_entropy: needs at least 2 classes");
  return g.cross_entropy_rows(logits, labels, ignore_label);
}

// Per-token affine classifier head.
template <class S>
struct LinearHead {
  Parameter<S> weight;  // classes x hidden
  Parameter<S> bias;    // 1 x classes

  static LinearHead init(const std::string& name, int classes, int hidden, Rng& rng,
                         double sigma = 0.02) {
    LinearHead h;
    h.weight = Parameter<S>(name + ".w", truncated_normal<S>(classes, hidden, sigma, rng));
    h.bias = Parameter<S>(name + ".b", Mat<S>::Zero(1, classes));
    return h;
  }

  std::vector<Parameter<S>*> parameters() { return {&weight, &bias}; }

  int num_classes() const { return static_cast<int>(weight.value.rows()); }
};

template <class S>
typename Graph<S>::Var ner_linear_head(Graph<S>& g, typename Graph<S>::Var token_embeddings,
                                       LinearHead<S>& head) {
  return g.add_rowvec(g.matmul_t(token_embeddings, g.param(head.weight)), g.param(head.bias));
}

}  // namespace tplf
