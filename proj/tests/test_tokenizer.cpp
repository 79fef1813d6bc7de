#include <doctest.h>

#include <nlohmann/json.hpp>

#include "tplf/tokenizer.hpp"

using namespace tplf;

namespace {

std::vector<std::vector<std::string>> corpus() {
  return {{"the", "cat", "sat"}, {"the", "dog", "sat"}, {"the", "end"}};
}

}  // namespace

TEST_CASE("reserved ids and vocabulary growth") {
  Tokenizer tok = Tokenizer::build(corpus(), 1);
  CHECK(tok.vocab_size() > 4);
  CHECK(tok.has_word("the"));
  CHECK(tok.has_word("cat"));
  auto ids = tok.word_to_ids("the");
  CHECK(ids.size() == 1);
  CHECK(ids[0] >= 4);
}

TEST_CASE("frequency cutoff falls back to characters") {
  Tokenizer tok = Tokenizer::build(corpus(), 2);  // only "the" and "sat" survive
  CHECK(tok.has_word("the"));
  CHECK_FALSE(tok.has_word("cat"));
  auto ids = tok.word_to_ids("cat");
  CHECK(ids.size() == 3);  // c-a-t, all seen in the corpus
  for (int id : ids) CHECK(id != Tokenizer::kUnk);
  // a word with a never-seen character maps to unk at that position
  auto weird = tok.word_to_ids("c@t");
  CHECK(weird[1] == Tokenizer::kUnk);
}

TEST_CASE("encode produces cls/sep framing and a valid alignment") {
  Tokenizer tok = Tokenizer::build(corpus(), 1);
  TokenBatch b = tok.encode({{"the", "cat"}, {"end"}}, 16);
  b.validate(tok.vocab_size());
  CHECK(b.batch() == 2);
  CHECK(b.token_ids(0, 0) == Tokenizer::kCls);
  CHECK(b.word_alignment[0].size() == 2);
  CHECK(b.word_alignment[0][0] == std::pair<int, int>(1, 2));
  CHECK(b.word_alignment[1].size() == 1);
  // row 1 is shorter: right padding, mask prefix
  CHECK(b.attention_mask(1, 3) == 0);
}

TEST_CASE("multi-subtoken words produce contiguous ranges") {
  Tokenizer tok = Tokenizer::build(corpus(), 2);
  TokenBatch b = tok.encode({{"the", "cat", "sat"}}, 16);
  auto [begin, end] = b.word_alignment[0][1];  // "cat" spelled out
  CHECK(end - begin == 3);
  CHECK(b.word_alignment[0][2].first == end);  // next word starts right after
}

TEST_CASE("truncation drops whole words, never splits one") {
  Tokenizer tok = Tokenizer::build(corpus(), 2);
  // max_seq_len 6: cls + "the"(1) + "cat"(3) + sep = 6 fits exactly, "sat" dropped
  TokenBatch b = tok.encode({{"the", "cat", "sat"}}, 6);
  CHECK(b.word_alignment[0].size() == 2);
  CHECK(b.seq_len() <= 6);
}

TEST_CASE("json round trip preserves encoding") {
  Tokenizer tok = Tokenizer::build(corpus(), 1);
  Tokenizer back = Tokenizer::from_json(tok.to_json());
  TokenBatch a = tok.encode({{"the", "dog"}}, 8);
  TokenBatch b = back.encode({{"the", "dog"}}, 8);
  CHECK(a.token_ids == b.token_ids);
  CHECK(back.vocab_size() == tok.vocab_size());
}

TEST_CASE("identical corpora build identical tokenizers") {
  Tokenizer a = Tokenizer::build(corpus(), 1);
  Tokenizer b = Tokenizer::build(corpus(), 1);
  CHECK(a.to_json() == b.to_json());
}

TEST_CASE("encode rejects degenerate inputs") {
  Tokenizer tok = Tokenizer::build(corpus(), 1);
  CHECK_THROWS_AS((void)tok.encode({}, 8), DataError);
  CHECK_THROWS_AS((void)tok.encode({{"the"}}, 2), ConfigError);
}
