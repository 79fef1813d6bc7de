#include "tplf/perturb.hpp"

#include <algorithm>

namespace tplf {

EntityBank EntityBank::harvest(const NerDataset& ds) {
  if (ds.scheme != TagScheme::kBio) throw DataError("EntityBank: needs a BIO-tagged dataset");
  EntityBank bank;
  for (const auto& s : ds.sentences) {
    for (const Span& sp : decode_bio_spans(s.tags)) {
      std::vector<std::string> surface(s.words.begin() + sp.start, s.words.begin() + sp.end);
      auto& pool = bank.surfaces[sp.type];
      if (std::find(pool.begin(), pool.end(), surface) == pool.end())
        pool.push_back(std::move(surface));
    }
  }
  return bank;
}

const std::vector<std::vector<std::string>>& EntityBank::of_type(const std::string& type) const {
  auto it = surfaces.find(type);
  if (it == surfaces.end() || it->second.empty())
    throw DataError("EntityBank: no surfaces for type '" + type + "'");
  return it->second;
}

namespace {

std::vector<std::string> respan_tags(const std::string& type, size_t len) {
  std::vector<std::string> tags{"B-" + type};
  for (size_t i = 1; i < len; ++i) tags.push_back("I-" + type);
  return tags;
}

}  // namespace

PerturbedSet perturb_entities(const NerSentence& sentence, const EntityBank& bank, int variants,
                              Rng& rng) {
  if (variants < 1) throw ConfigError("perturb_entities: variants must be >= 1");
  auto spans = decode_bio_spans(sentence.tags);
  for (const Span& sp : spans) bank.of_type(sp.type);  // missing types fail up front

  PerturbedSet out;
  out.original = sentence;
  for (int v = 0; v < variants; ++v) {
    NerSentence variant;
    int cursor = 0;
    for (const Span& sp : spans) {
      for (int i = cursor; i < sp.start; ++i) {
        variant.words.push_back(sentence.words[static_cast<size_t>(i)]);
        variant.tags.push_back(sentence.tags[static_cast<size_t>(i)]);
      }
      const auto& pool = bank.of_type(sp.type);
      std::vector<std::string> original_surface(sentence.words.begin() + sp.start,
                                                sentence.words.begin() + sp.end);
      std::vector<const std::vector<std::string>*> candidates;
      for (const auto& surf : pool)
        if (surf != original_surface) candidates.push_back(&surf);
      const std::vector<std::string>* pick;
      if (candidates.empty()) {
        pick = &original_surface;  // singleton type: identity replacement allowed
      } else {
        std::uniform_int_distribution<size_t> u(0, candidates.size() - 1);
        pick = candidates[u(rng)];
      }
      auto tags = respan_tags(sp.type, pick->size());
      variant.words.insert(variant.words.end(), pick->begin(), pick->end());
      variant.tags.insert(variant.tags.end(), tags.begin(), tags.end());
      cursor = sp.end;
    }
    for (int i = cursor; i < static_cast<int>(sentence.words.size()); ++i) {
      variant.words.push_back(sentence.words[static_cast<size_t>(i)]);
      variant.tags.push_back(sentence.tags[static_cast<size_t>(i)]);
    }
    out.variants.push_back(std::move(variant));
  }
  return out;
}

std::vector<PerturbedSet> perturb_dataset(const NerDataset& ds, const EntityBank& bank,
                                          int variants, uint64_t seed) {
  Rng rng(seed);
  std::vector<PerturbedSet> out;
  out.reserve(ds.sentences.size());
  for (const auto& s : ds.sentences) out.push_back(perturb_entities(s, bank, variants, rng));
  return out;
}

}  // namespace tplf
