#include <doctest.h>

#include <random>

#include "support/span_oracle.hpp"
#include "tplf/metrics.hpp"
#include "tplf/synthetic.hpp"

using namespace tplf;

TEST_CASE("perfect prediction scores F1 = 1") {
  std::vector<std::vector<std::string>> gold{{"B-PER", "I-PER", "O", "B-LOC"}};
  auto scores = span_f1(gold, gold);
  CHECK(scores.f1 == 1.0);
  CHECK(scores.precision == 1.0);
  CHECK(scores.recall == 1.0);
}

TEST_CASE("half recall at full precision gives F1 two-thirds") {
  std::vector<std::vector<std::string>> gold{{"B-PER", "O", "B-LOC"}};
  std::vector<std::vector<std::string>> pred{{"B-PER", "O", "O"}};
  auto scores = span_f1(pred, gold);
  CHECK(scores.precision == 1.0);
  CHECK(scores.recall == 0.5);
  CHECK(scores.f1 == doctest::Approx(0.6667).epsilon(1e-4));
}

TEST_CASE("empty predictions against non-empty gold score zero by convention") {
  std::vector<std::vector<std::string>> gold{{"B-PER", "O"}};
  std::vector<std::vector<std::string>> pred{{"O", "O"}};
  auto scores = span_f1(pred, gold);
  CHECK(scores.precision == 0.0);
  CHECK(scores.recall == 0.0);
  CHECK(scores.f1 == 0.0);
}

TEST_CASE("length mismatch is an error") {
  CHECK_THROWS_AS((void)span_f1({{"O"}}, {{"O", "O"}}), ConfigError);
  CHECK_THROWS_AS((void)span_f1({{"O"}}, {{"O"}, {"O"}}), ConfigError);
}

TEST_CASE("I-X without an opener starts a span (conlleval convention)") {
  auto spans = decode_bio_spans({"I-LOC", "I-LOC", "O", "I-PER"});
  REQUIRE(spans.size() == 2);
  CHECK(spans[0] == Span{0, 2, "LOC"});
  CHECK(spans[1] == Span{3, 4, "PER"});

  // B always opens fresh; type change inside I opens fresh
  auto spans2 = decode_bio_spans({"B-A", "B-A", "I-B"});
  REQUIRE(spans2.size() == 3);
  CHECK(spans2[1] == Span{1, 2, "A"});
  CHECK(spans2[2] == Span{2, 3, "B"});

  CHECK_THROWS_AS((void)decode_bio_spans({"Q-LOC"}), DataError);
}

TEST_CASE("span_f1 equals the brute-force oracle on 1000 fuzz cases") {
  Rng rng(41);
  std::vector<std::string> alphabet = {"O", "B-X", "I-X", "B-Y", "I-Y", "B-Z", "I-Z"};
  std::uniform_int_distribution<size_t> pick(0, alphabet.size() - 1);
  std::uniform_int_distribution<int> len(1, 14);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::vector<std::string>> pred(3), gold(3);
    for (int s = 0; s < 3; ++s) {
      int n = len(rng);
      for (int i = 0; i < n; ++i) {
        pred[static_cast<size_t>(s)].push_back(alphabet[pick(rng)]);
        gold[static_cast<size_t>(s)].push_back(alphabet[pick(rng)]);
      }
    }
    auto fast = span_f1(pred, gold);
    auto slow = test_support::oracle_f1(pred, gold);
    CHECK(fast.matched_spans == slow.matched_spans);
    CHECK(fast.predicted_spans == slow.predicted_spans);
    CHECK(fast.gold_spans == slow.gold_spans);
    CHECK(fast.f1 == slow.f1);
  }
}

TEST_CASE("limited_data_split: identity, exact size, determinism") {
  BioCorpusConfig cfg;
  cfg.n_sentences = 100;
  NerDataset ds = make_bio_corpus(cfg, 5);

  NerDataset whole = limited_data_split(ds, 1.0, 9);
  CHECK(whole.sentences.size() == 100);
  CHECK(whole.content_hash() == ds.content_hash());  // same items, same order

  NerDataset tenth = limited_data_split(ds, 0.1, 9);
  CHECK(tenth.sentences.size() == 10);

  NerDataset again = limited_data_split(ds, 0.1, 9);
  CHECK(again.content_hash() == tenth.content_hash());

  NerDataset other_seed = limited_data_split(ds, 0.1, 10);
  CHECK(other_seed.content_hash() != tenth.content_hash());

  CHECK_THROWS_AS((void)limited_data_split(ds, 0.0, 1), ConfigError);
  CHECK_THROWS_AS((void)limited_data_split(ds, 1.5, 1), ConfigError);
}

TEST_CASE("limited_data_split repairs entity-type coverage when feasible") {
  // one sentence carries the rare type; subsamples must keep covering it
  BioCorpusConfig cfg;
  cfg.n_sentences = 60;
  cfg.n_types = 2;
  NerDataset ds = make_bio_corpus(cfg, 6);
  NerSentence rare;
  rare.words = {"ctx", "rareword"};
  rare.tags = {"O", "B-RARE"};
  ds.sentences.push_back(rare);
  ds.label_names.push_back("B-RARE");

  for (uint64_t seed = 0; seed < 10; ++seed) {
    NerDataset sub = limited_data_split(ds, 0.2, seed);
    bool has_rare = false;
    for (const auto& s : sub.sentences)
      for (const auto& t : s.tags)
        if (t == "B-RARE") has_rare = true;
    CHECK(has_rare);
    CHECK(sub.sentences.size() == 13);  // ceil(0.2 * 61)
  }
}
