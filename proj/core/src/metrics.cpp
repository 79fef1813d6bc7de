#include "tplf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace tplf {

std::vector<Span> decode_bio_spans(const std::vector<std::string>& tags) {
  std::vector<Span> spans;
  Span open;
  bool has_open = false;
  auto close = [&]() {
    if (has_open) {
      spans.push_back(open);
      has_open = false;
    }
  };
  for (int i = 0; i < static_cast<int>(tags.size()); ++i) {
    const std::string& t = tags[static_cast<size_t>(i)];
    if (t == "O") {
      close();
      continue;
    }
    if (t.size() < 3 || (t[0] != 'B' && t[0] != 'I') || t[1] != '-')
      throw DataError("decode_bio_spans: malformed tag '" + t + "'");
    std::string type = t.substr(2);
    if (t[0] == 'B' || !has_open || open.type != type) {
      close();
      open = {i, i + 1, type};
      has_open = true;
    } else {
      open.end = i + 1;
    }
  }
  close();
  return spans;
}

F1Scores span_f1(const std::vector<std::vector<std::string>>& predicted,
                 const std::vector<std::vector<std::string>>& gold) {
  if (predicted.size() != gold.size())
    throw ConfigError("span_f1: sentence counts disagree");
  F1Scores out;
  for (size_t i = 0; i < gold.size(); ++i) {
    if (predicted[i].size() != gold[i].size())
      throw ConfigError("span_f1: length mismatch at sentence " + std::to_string(i));
    auto p = decode_bio_spans(predicted[i]);
    auto g = decode_bio_spans(gold[i]);
    out.predicted_spans += static_cast<int64_t>(p.size());
    out.gold_spans += static_cast<int64_t>(g.size());
    for (const Span& s : p)
      if (std::find(g.begin(), g.end(), s) != g.end()) ++out.matched_spans;
  }
  out.precision = out.predicted_spans > 0
                      ? static_cast<double>(out.matched_spans) / static_cast<double>(out.predicted_spans)
                      : 0.0;
  out.recall = out.gold_spans > 0
                   ? static_cast<double>(out.matched_spans) / static_cast<double>(out.gold_spans)
                   : 0.0;
  out.f1 = (out.precision + out.recall) > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

namespace {

std::set<std::string> sentence_types(const NerSentence& s) {
  std::set<std::string> types;
  for (const Span& sp : decode_bio_spans(s.tags)) types.insert(sp.type);
  return types;
}

}  // namespace

NerDataset limited_data_split(const NerDataset& ds, double fraction, uint64_t seed) {
  if (fraction <= 0.0 || fraction > 1.0)
    throw ConfigError("limited_data_split: fraction must be in (0,1]");
  const size_t n = ds.sentences.size();
  const size_t m = static_cast<size_t>(std::ceil(fraction * static_cast<double>(n)));
  if (m == 0) throw ConfigError("limited_data_split: fraction yields zero items");
  if (m >= n) return ds;

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<size_t> chosen(order.begin(), order.begin() + static_cast<long>(m));
  std::sort(chosen.begin(), chosen.end());

  if (ds.scheme == TagScheme::kBio) {
    // restore coverage of entity types that the subsample lost, when a swap
    // can be made without dropping another type
    std::set<std::string> full_types;
    for (const auto& s : ds.sentences)
      for (const auto& t : sentence_types(s)) full_types.insert(t);
    auto coverage = [&]() {
      std::map<std::string, int> c;
      for (size_t i : chosen)
        for (const auto& t : sentence_types(ds.sentences[i])) ++c[t];
      return c;
    };
    auto cov = coverage();
    std::set<size_t> chosen_set(chosen.begin(), chosen.end());
    for (const auto& missing : full_types) {
      if (cov.count(missing)) continue;
      size_t candidate = n;
      for (size_t i = 0; i < n; ++i)
        if (!chosen_set.count(i) && sentence_types(ds.sentences[i]).count(missing)) {
          candidate = i;
          break;
        }
      if (candidate == n) continue;
      for (size_t vi = 0; vi < chosen.size(); ++vi) {
        bool removable = true;
        for (const auto& t : sentence_types(ds.sentences[chosen[vi]]))
          if (cov[t] <= 1) {
            removable = false;
            break;
          }
        if (!removable) continue;
        chosen_set.erase(chosen[vi]);
        for (const auto& t : sentence_types(ds.sentences[chosen[vi]])) --cov[t];
        chosen[vi] = candidate;
        chosen_set.insert(candidate);
        for (const auto& t : sentence_types(ds.sentences[candidate])) ++cov[t];
        break;
      }
    }
    std::sort(chosen.begin(), chosen.end());
  }

  NerDataset out;
  out.scheme = ds.scheme;
  out.label_names = ds.label_names;
  for (size_t i : chosen) out.sentences.push_back(ds.sentences[i]);
  return out;
}

}  // namespace tplf
