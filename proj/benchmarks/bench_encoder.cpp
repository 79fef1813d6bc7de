#include <benchmark/benchmark.h>

#include "tplf/encoder.hpp"
#include "tplf/synthetic.hpp"
#include "tplf/tokenizer.hpp"

namespace {

struct Fixture {
  tplf::Tokenizer tok;
  tplf::EncoderParams<float> params;
  tplf::TokenBatch batch;

  Fixture() {
    tplf::TopicPairsConfig pc;
    pc.n_pairs = 256;
    auto pairs = tplf::make_topic_pairs(pc, 1);
    tok = tplf::Tokenizer::build(tplf::corpus_words(pairs), 1);
    tplf::EncoderConfig cfg;
    cfg.num_layers = 4;
    cfg.hidden_dim = 64;
    cfg.num_heads = 4;
    cfg.ffn_dim = 128;
    cfg.vocab_size = tok.vocab_size();
    cfg.max_seq_len = 16;
    cfg.seed = 1;
    params = tplf::EncoderParams<float>::init(cfg);
    std::vector<std::vector<std::string>> sents;
    for (int i = 0; i < 32; ++i) sents.push_back(tplf::split_whitespace(pairs.pairs[i].anchor));
    batch = tok.encode(sents, cfg.max_seq_len);
  }
};

void BM_EncodeForward(benchmark::State& state) {
  Fixture f;
  for (auto _ : state) {
    auto out = tplf::encode_tokens_eval(f.batch, f.params);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_EncodeForward)->Unit(benchmark::kMillisecond);

void BM_EncodeForwardBackward(benchmark::State& state) {
  Fixture f;
  for (auto _ : state) {
    tplf::Graph<float> g;
    auto tokens = tplf::encode_tokens(g, f.batch, f.params, {});
    auto pooled = g.mean_pool_rows(tokens, f.batch.attention_mask);
    g.backward(g.sum(g.hadamard(pooled, pooled)));
    benchmark::DoNotOptimize(g.grad(f.params.token_embeddings).data());
  }
}
BENCHMARK(BM_EncodeForwardBackward)->Unit(benchmark::kMillisecond);

}  // namespace
