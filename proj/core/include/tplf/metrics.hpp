#pragma once

#include <string>
#include <vector>

#include "tplf/datasets.hpp"

namespace tplf {

// Half-open word span [start, end) with an entity type.
struct Span {
  int start = 0;
  int end = 0;
  std::string type;

  bool operator==(const Span& o) const = default;
};

// conlleval-style decoding: B-X opens a span; I-X continues a span of the
// same type and otherwise opens a new one; O closes.
std::vector<Span> decode_bio_spans(const std::vector<std::string>& tags);

struct F1Scores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int64_t predicted_spans = 0;
  int64_t gold_spans = 0;
  int64_t matched_spans = 0;
};

// Micro-averaged exact-match span F1 (type and boundaries must both agree).
F1Scores span_f1(const std::vector<std::vector<std::string>>& predicted,
                 const std::vector<std::vector<std::string>>& gold);

// Deterministic sentence-level subsample of ceil(fraction*N) items, with a
// greedy repair pass that restores entity-type coverage when feasible.
NerDataset limited_data_split(const NerDataset& ds, double fraction, uint64_t seed);

}  // namespace tplf
