#include <doctest.h>

#include "tplf/pseudo_labels.hpp"
#include "tplf/synthetic.hpp"

using namespace tplf;

namespace {

TokenBatch batch_with_alignment(std::vector<std::pair<int, int>> ranges, int seq) {
  TokenBatch b;
  b.token_ids = MatI::Zero(1, seq);
  b.attention_mask = MatI::Ones(1, seq);
  b.word_alignment.push_back(std::move(ranges));
  return b;
}

}  // namespace

TEST_CASE("single-sub-token word keeps its embedding") {
  Mat<float> tokens = Mat<float>::Random(5, 4);
  TokenBatch b = batch_with_alignment({{1, 2}, {2, 3}}, 5);
  Mat<float> words = word_embeddings_from_subtokens(tokens, b);
  CHECK(words.rows() == 2);
  CHECK(words.row(0) == tokens.row(1));
  CHECK(words.row(1) == tokens.row(2));
}

TEST_CASE("two sub-tokens average") {
  Mat<float> tokens(4, 2);
  tokens << 0, 0, 0, 2, 2, 0, 0, 0;
  TokenBatch b = batch_with_alignment({{1, 3}}, 4);
  Mat<float> words = word_embeddings_from_subtokens(tokens, b);
  CHECK(words(0, 0) == 1.0f);
  CHECK(words(0, 1) == 1.0f);
}

TEST_CASE("three words of a five-sub-token sequence give three rows") {
  Mat<float> tokens = Mat<float>::Random(5, 3);
  TokenBatch b = batch_with_alignment({{1, 2}, {2, 4}, {4, 5}}, 5);
  CHECK(word_embeddings_from_subtokens(tokens, b).rows() == 3);
}

TEST_CASE("pseudo dataset: range contract, determinism, inheritance") {
  BioCorpusConfig bc;
  bc.n_sentences = 24;
  NerDataset corpus = make_bio_corpus(bc, 3);
  auto words = corpus_words(corpus);
  Tokenizer tok = Tokenizer::build(words, 1);

  EncoderConfig cfg;
  cfg.num_layers = 1;
  cfg.hidden_dim = 16;
  cfg.num_heads = 4;
  cfg.ffn_dim = 32;
  cfg.vocab_size = tok.vocab_size();
  cfg.max_seq_len = 24;
  cfg.dropout_rate = 0.0;
  cfg.seed = 9;
  EncoderParams<float> teacher = EncoderParams<float>::init(cfg);  // self-distillation smoke case

  PseudoLabelConfig pcfg;
  pcfg.kmeans.k = 5;
  pcfg.kmeans.batch_size = 32;
  pcfg.kmeans.epochs = 3;
  pcfg.seed = 1;
  NerDataset pseudo = build_pseudo_dataset(words, teacher, tok, pcfg);

  CHECK(pseudo.scheme == TagScheme::kCluster);
  CHECK(pseudo.label_names.size() == 5);
  for (const auto& s : pseudo.sentences) {
    CHECK(!s.words.empty());
    for (const auto& t : s.tags) {
      int id = std::stoi(t.substr(1));
      CHECK(id >= 0);
      CHECK(id < 5);
    }
  }

  NerDataset again = build_pseudo_dataset(words, teacher, tok, pcfg);
  CHECK(again.content_hash() == pseudo.content_hash());

  // sub-tokens of one word inherit the word's label in training batches
  std::vector<const NerSentence*> sents;
  for (const auto& s : pseudo.sentences) sents.push_back(&s);
  TokenLabeledBatch batch = make_token_labeled_batch(sents, tok, cfg.max_seq_len,
                                                     pseudo.label_names,
                                                     SubtokenLabeling::kInheritAll);
  batch.validate(tok.vocab_size(), 5);
  for (size_t b = 0; b < batch.tokens.word_alignment.size(); ++b) {
    for (auto [begin, end] : batch.tokens.word_alignment[b]) {
      int first = batch.labels(static_cast<Eigen::Index>(b), begin);
      for (int s = begin; s < end; ++s)
        CHECK(batch.labels(static_cast<Eigen::Index>(b), s) == first);
    }
  }
}

TEST_CASE("corpus smaller than k is an error") {
  Tokenizer tok = Tokenizer::build({{"a", "b"}}, 1);
  EncoderConfig cfg;
  cfg.num_layers = 0;
  cfg.hidden_dim = 8;
  cfg.num_heads = 2;
  cfg.ffn_dim = 16;
  cfg.vocab_size = tok.vocab_size();
  cfg.max_seq_len = 8;
  cfg.seed = 1;
  EncoderParams<float> teacher = EncoderParams<float>::init(cfg);
  PseudoLabelConfig pcfg;
  pcfg.kmeans.k = 5;
  pcfg.kmeans.batch_size = 8;
  CHECK_THROWS_AS((void)build_pseudo_dataset({{"a", "b"}}, teacher, tok, pcfg), DataError);
}
