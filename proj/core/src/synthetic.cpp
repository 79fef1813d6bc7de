#include "tplf/synthetic.hpp"

#include <algorithm>
#include <sstream>

namespace tplf {

namespace {

std::string word_of(const char* prefix, int a, int b = -1) {
  std::ostringstream s;
  s << prefix << a;
  if (b >= 0) s << "x" << b;
  return s.str();
}

std::vector<std::string> filler_pool(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(word_of("f", i));
  return out;
}

template <class T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  std::uniform_int_distribution<size_t> u(0, v.size() - 1);
  return v[u(rng)];
}

}  // namespace

PairDataset make_topic_pairs(const TopicPairsConfig& cfg, uint64_t seed) {
  Rng rng(seed);
  auto fillers = filler_pool(cfg.n_fillers);
  std::vector<std::vector<std::string>> topics(static_cast<size_t>(cfg.n_topics));
  for (int t = 0; t < cfg.n_topics; ++t)
    for (int w = 0; w < cfg.words_per_topic; ++w)
      topics[static_cast<size_t>(t)].push_back(word_of("t", t, w));

  std::bernoulli_distribution is_topic(cfg.topic_word_prob);
  auto sentence = [&](int topic) {
    std::vector<std::string> words;
    for (int i = 0; i < cfg.sentence_words; ++i)
      words.push_back(is_topic(rng) ? pick(topics[static_cast<size_t>(topic)], rng)
                                    : pick(fillers, rng));
    std::string out;
    for (size_t i = 0; i < words.size(); ++i) {
      if (i) out += " ";
      out += words[i];
    }
    return out;
  };

  PairDataset ds;
  std::uniform_int_distribution<int> pick_topic(0, cfg.n_topics - 1);
  for (int i = 0; i < cfg.n_pairs; ++i) {
    int t = pick_topic(rng);
    ds.pairs.push_back({sentence(t), sentence(t)});
  }
  return ds;
}

NerDataset make_bio_corpus(const BioCorpusConfig& cfg, uint64_t seed) {
  Rng rng(seed);
  auto fillers = filler_pool(cfg.n_fillers);
  std::vector<std::string> type_names;
  for (int t = 0; t < cfg.n_types; ++t) type_names.push_back("T" + std::to_string(t));
  std::vector<std::vector<std::vector<std::string>>> surfaces(static_cast<size_t>(cfg.n_types));
  std::uniform_int_distribution<int> surface_len(1, cfg.max_surface_words);
  for (int t = 0; t < cfg.n_types; ++t)
    for (int s = 0; s < cfg.surfaces_per_type; ++s) {
      std::vector<std::string> surf;
      int len = surface_len(rng);
      for (int w = 0; w < len; ++w) surf.push_back(word_of("e", t, s * cfg.max_surface_words + w));
      surfaces[static_cast<size_t>(t)].push_back(std::move(surf));
    }

  NerDataset ds;
  ds.scheme = TagScheme::kBio;
  std::uniform_int_distribution<int> n_entities(1, cfg.max_entities);
  std::uniform_int_distribution<int> pick_type(0, cfg.n_types - 1);
  for (int i = 0; i < cfg.n_sentences; ++i) {
    NerSentence sent;
    int entities = n_entities(rng);
    for (int e = 0; e < entities; ++e) {
      for (int c = 0; c < cfg.context_words / 2 + 1; ++c) {
        sent.words.push_back(pick(fillers, rng));
        sent.tags.push_back("O");
      }
      int t = pick_type(rng);
      const auto& surf = pick(surfaces[static_cast<size_t>(t)], rng);
      for (size_t w = 0; w < surf.size(); ++w) {
        sent.words.push_back(surf[w]);
        sent.tags.push_back((w == 0 ? "B-" : "I-") + type_names[static_cast<size_t>(t)]);
      }
    }
    for (int c = 0; c < cfg.context_words / 2; ++c) {
      sent.words.push_back(pick(fillers, rng));
      sent.tags.push_back("O");
    }
    ds.sentences.push_back(std::move(sent));
  }
  ds.label_names.push_back("O");
  for (const auto& t : type_names) {
    ds.label_names.push_back("B-" + t);
    ds.label_names.push_back("I-" + t);
  }
  return ds;
}

namespace {

struct ConflictVocab {
  std::vector<std::string> fillers;
  std::vector<std::string> type_names;
  // surfaces[type][topic][i]: single-word surfaces grouped by topic identity
  std::vector<std::vector<std::vector<std::string>>> surfaces;
};

ConflictVocab conflict_vocab(const ConflictBenchmarkConfig& cfg) {
  ConflictVocab v;
  v.fillers = filler_pool(cfg.n_fillers);
  for (int t = 0; t < cfg.n_types; ++t) v.type_names.push_back("T" + std::to_string(t));
  v.surfaces.resize(static_cast<size_t>(cfg.n_types));
  for (int t = 0; t < cfg.n_types; ++t) {
    v.surfaces[static_cast<size_t>(t)].resize(static_cast<size_t>(cfg.n_topics));
    for (int c = 0; c < cfg.n_topics; ++c)
      for (int s = 0; s < cfg.surfaces_per_type_per_topic; ++s)
        v.surfaces[static_cast<size_t>(t)][static_cast<size_t>(c)].push_back(
            word_of("e", t, c * cfg.surfaces_per_type_per_topic + s));
  }
  return v;
}

NerSentence conflict_sentence(const ConflictBenchmarkConfig& cfg, const ConflictVocab& v,
                              int topic, Rng& rng) {
  NerSentence sent;
  std::bernoulli_distribution faithful(cfg.identity_fidelity);
  std::uniform_int_distribution<int> pick_type(0, cfg.n_types - 1);
  std::uniform_int_distribution<int> pick_topic(0, cfg.n_topics - 1);
  for (int e = 0; e < cfg.entities_per_sentence; ++e) {
    for (int c = 0; c < cfg.context_words / cfg.entities_per_sentence + 1; ++c) {
      sent.words.push_back(pick(v.fillers, rng));
      sent.tags.push_back("O");
    }
    int t = pick_type(rng);
    int group = faithful(rng) ? topic : pick_topic(rng);
    const auto& pool = v.surfaces[static_cast<size_t>(t)][static_cast<size_t>(group)];
    sent.words.push_back(pick(pool, rng));
    sent.tags.push_back("B-" + v.type_names[static_cast<size_t>(t)]);
  }
  return sent;
}

std::string to_text(const NerSentence& s) {
  std::string out;
  for (size_t i = 0; i < s.words.size(); ++i) {
    if (i) out += " ";
    out += s.words[i];
  }
  return out;
}

}  // namespace

ConflictBenchmark make_conflict_benchmark(const ConflictBenchmarkConfig& cfg, uint64_t seed) {
  Rng rng(seed);
  ConflictVocab vocab = conflict_vocab(cfg);
  ConflictBenchmark out;

  std::uniform_int_distribution<int> pick_topic(0, cfg.n_topics - 1);
  for (int i = 0; i < cfg.pretrain_pairs; ++i) {
    int c = pick_topic(rng);
    out.tc_pairs.pairs.push_back(
        {to_text(conflict_sentence(cfg, vocab, c, rng)), to_text(conflict_sentence(cfg, vocab, c, rng))});
  }

  auto fill_ner = [&](NerDataset& ds, int n) {
    ds.scheme = TagScheme::kBio;
    for (int i = 0; i < n; ++i)
      ds.sentences.push_back(conflict_sentence(cfg, vocab, pick_topic(rng), rng));
    ds.label_names = {"O"};
    for (const auto& t : vocab.type_names) {
      ds.label_names.push_back("B-" + t);
      ds.label_names.push_back("I-" + t);
    }
  };
  fill_ner(out.ner_pretrain, cfg.pretrain_ner_sentences);
  fill_ner(out.ner_train, cfg.downstream_train_sentences);
  fill_ner(out.ner_test, cfg.downstream_test_sentences);

  auto fill_tc = [&](LabeledTextDataset& ds, int n) {
    for (int i = 0; i < n; ++i) {
      int c = pick_topic(rng);
      ds.items.push_back({to_text(conflict_sentence(cfg, vocab, c, rng)), "C" + std::to_string(c)});
    }
    for (int c = 0; c < cfg.n_topics; ++c) ds.label_names.push_back("C" + std::to_string(c));
  };
  fill_tc(out.tc_train, cfg.downstream_tc_train);
  fill_tc(out.tc_test, cfg.downstream_tc_test);
  return out;
}

std::vector<std::vector<std::string>> corpus_words(const PairDataset& pairs) {
  std::vector<std::vector<std::string>> out;
  out.reserve(pairs.pairs.size() * 2);
  for (const auto& p : pairs.pairs) {
    out.push_back(split_whitespace(p.anchor));
    out.push_back(split_whitespace(p.positive));
  }
  return out;
}

std::vector<std::vector<std::string>> corpus_words(const NerDataset& ds) {
  std::vector<std::vector<std::string>> out;
  out.reserve(ds.sentences.size());
  for (const auto& s : ds.sentences) out.push_back(s.words);
  return out;
}

}  // namespace tplf
