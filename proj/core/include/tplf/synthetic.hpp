#pragma once

#include <string>
#include <vector>

#include "tplf/datasets.hpp"

namespace tplf {

// Desk-scale stand-ins for the large pre-finetuning corpora, in the same file
// formats. Topic pairs share topic-specific words; BIO corpora embed typed
// entity spans in filler text.

struct TopicPairsConfig {
  int n_pairs = 1000;
  int n_topics = 8;
  int words_per_topic = 12;
  int n_fillers = 40;
  int sentence_words = 8;
  double topic_word_prob = 0.65;
};

PairDataset make_topic_pairs(const TopicPairsConfig& cfg, uint64_t seed);

struct BioCorpusConfig {
  int n_sentences = 600;
  int n_types = 4;
  int surfaces_per_type = 12;
  int n_fillers = 40;
  int context_words = 6;
  int max_entities = 2;
  int max_surface_words = 2;
};

NerDataset make_bio_corpus(const BioCorpusConfig& cfg, uint64_t seed);

// A bi-task benchmark over one shared vocabulary, built so the two task
// families pull token embeddings in opposite directions: the topic of a
// sentence is carried by WHICH entity surfaces appear (identity groups),
// while the token task supervises only their TYPE. Collapsing same-type
// entities helps the token task and erases the topic signal, and vice versa.
struct ConflictBenchmarkConfig {
  int n_types = 4;
  int n_topics = 4;
  int surfaces_per_type_per_topic = 3;  // identity-group size
  int n_fillers = 30;
  int context_words = 5;
  int entities_per_sentence = 2;
  double identity_fidelity = 0.95;  // probability an entity follows the topic's group
  int pretrain_pairs = 1500;
  int pretrain_ner_sentences = 1200;
  int downstream_train_sentences = 160;
  int downstream_test_sentences = 160;
  int downstream_tc_train = 160;
  int downstream_tc_test = 160;
};

struct ConflictBenchmark {
  PairDataset tc_pairs;              // contrastive pre-finetuning corpus
  NerDataset ner_pretrain;           // token-task pre-finetuning corpus
  NerDataset ner_train;              // downstream NER
  NerDataset ner_test;
  LabeledTextDataset tc_train;       // downstream topic classification
  LabeledTextDataset tc_test;
};

ConflictBenchmark make_conflict_benchmark(const ConflictBenchmarkConfig& cfg, uint64_t seed);

// All word sequences of a pair/text corpus, for tokenizer construction.
std::vector<std::vector<std::string>> corpus_words(const PairDataset& pairs);
std::vector<std::vector<std::string>> corpus_words(const NerDataset& ds);

}  // namespace tplf
