#include <doctest.h>

#include <set>

#include "tplf/encoder.hpp"

using namespace tplf;

namespace {

EncoderConfig six_layer_config() {
  EncoderConfig cfg;
  cfg.num_layers = 6;
  cfg.hidden_dim = 16;
  cfg.num_heads = 4;
  cfg.ffn_dim = 32;
  cfg.vocab_size = 32;
  cfg.max_seq_len = 16;
  cfg.dropout_rate = 0.0;
  cfg.seed = 3;
  return cfg;
}

TokenBatch tiny_batch() {
  TokenBatch b;
  b.token_ids = MatI::Zero(2, 5);
  b.attention_mask = MatI::Ones(2, 5);
  b.token_ids << 2, 5, 6, 7, 3, 2, 8, 9, 10, 3;
  return b;
}

}  // namespace

TEST_CASE("freshly initialized adapter is a no-op (B = 0)") {
  LoraSpec spec;
  spec.rank = 4;
  Rng rng(1);
  auto mod = lora_init<float>(spec, 8, 8, rng, "tpl.test");
  CHECK(mod.B.value.isZero());
  Mat<float> x = Mat<float>::Random(3, 8);
  CHECK(lora_delta(mod, x).isZero());
}

TEST_CASE("same seed gives identical A; sigma 0 gives zero A") {
  LoraSpec spec;
  spec.rank = 2;
  Rng r1(7), r2(7);
  auto a = lora_init<float>(spec, 4, 4, r1, "x");
  auto b = lora_init<float>(spec, 4, 4, r2, "x");
  CHECK(a.A.value == b.A.value);

  spec.init_sigma = 0.0;
  Rng r3(7);
  auto c = lora_init<float>(spec, 4, 4, r3, "x");
  CHECK(c.A.value.isZero());
}

TEST_CASE("oversized rank warns but is allowed") {
  LoraSpec spec;
  spec.rank = 16;
  int warnings = 0;
  auto old = warning_handler();
  warning_handler() = [&](const std::string&) { ++warnings; };
  Rng rng(1);
  auto mod = lora_init<float>(spec, 4, 4, rng, "x");
  warning_handler() = old;
  CHECK(warnings == 1);
  CHECK(mod.A.value.rows() == 16);
}

TEST_CASE("lora_forward worked example: identity W, rank 1") {
  // W = I2, x = (1,2), r=1, alpha=2, A=[1,0], B=(1,0)^T -> y = (3,2)
  LoraModule<float> mod;
  mod.rank = 1;
  mod.alpha = 2.0;
  mod.A = Parameter<float>("A", Mat<float>::Zero(1, 2));
  mod.A.value << 1, 0;
  mod.B = Parameter<float>("B", Mat<float>::Zero(2, 1));
  mod.B.value << 1, 0;

  Graph<float> g;
  Mat<float> x(1, 2);
  x << 1, 2;
  Parameter<float> w("w", Mat<float>::Identity(2, 2));
  auto xv = g.input(x);
  auto base = g.matmul_t(xv, g.param(w));
  auto y = lora_forward(g, base, xv, mod);
  CHECK(g.value(y)(0, 0) == doctest::Approx(3.0f));
  CHECK(g.value(y)(0, 1) == doctest::Approx(2.0f));

  // alpha = 0 makes the adapter vanish
  mod.alpha = 0.0;
  Graph<float> g2;
  auto y2 = lora_forward(g2, g2.matmul_t(g2.input(x), g2.param(w)), g2.input(x), mod);
  CHECK(g2.value(y2)(0, 0) == 1.0f);
  CHECK(g2.value(y2)(0, 1) == 2.0f);
}

TEST_CASE("scale linearity: doubling alpha doubles the delta") {
  LoraSpec spec;
  spec.rank = 2;
  Rng rng(5);
  auto mod = lora_init<float>(spec, 6, 4, rng, "x");
  std::normal_distribution<float> d(0.f, 1.f);
  for (Eigen::Index i = 0; i < mod.B.value.size(); ++i) mod.B.value.data()[i] = d(rng);
  Mat<float> x = Mat<float>::Random(3, 6);
  Mat<float> delta1 = lora_delta(mod, x);
  mod.alpha *= 2.0;
  Mat<float> delta2 = lora_delta(mod, x);
  CHECK((delta2 - 2.0f * delta1).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("merge matches adapter forward on random inputs") {
  LoraSpec spec;
  spec.rank = 3;
  Rng rng(9);
  auto mod = lora_init<float>(spec, 8, 8, rng, "x");
  std::normal_distribution<float> d(0.f, 0.5f);
  for (Eigen::Index i = 0; i < mod.B.value.size(); ++i) mod.B.value.data()[i] = d(rng);
  Mat<float> w = Mat<float>::Random(8, 8);
  Mat<float> merged = lora_merge(w, mod);
  float max_diff = 0.f;
  for (int trial = 0; trial < 100; ++trial) {
    Mat<float> x = Mat<float>::Random(1, 8);
    Mat<float> via_adapter = x * w.transpose() + lora_delta(mod, x);
    Mat<float> via_merged = x * merged.transpose();
    max_diff = std::max(max_diff, (via_adapter - via_merged).cwiseAbs().maxCoeff());
  }
  CHECK(max_diff < 1e-5f);
}

TEST_CASE("merge with B=0 is bitwise identity; double merge is an error") {
  LoraSpec spec;
  spec.rank = 2;
  Rng rng(4);
  auto mod = lora_init<float>(spec, 4, 4, rng, "x");
  Mat<float> w = Mat<float>::Random(4, 4);
  Mat<float> merged = lora_merge(w, mod);
  CHECK(merged == w);
  CHECK_THROWS_AS((void)lora_merge(w, mod), ConfigError);
  lora_detach(mod);
  CHECK_NOTHROW((void)lora_merge(w, mod));
}

TEST_CASE("attach_task_primary defaults to the last two layers") {
  auto cfg = six_layer_config();
  LoraSpec spec;
  spec.rank = 2;
  auto set = attach_task_primary<float>(cfg, spec, {TaskId::kNer, TaskId::kTc}, 1);
  std::set<int> layers;
  for (const auto& [key, mod] : set.ner) layers.insert(key.first);
  CHECK(layers == std::set<int>{4, 5});

  spec.target_layers = LoraSpec::last_n_layers(cfg.num_layers, cfg.num_layers);
  auto all = attach_task_primary<float>(cfg, spec, {TaskId::kNer}, 1);
  std::set<int> all_layers;
  for (const auto& [key, mod] : all.ner) all_layers.insert(key.first);
  CHECK(all_layers.size() == 6);
}

TEST_CASE("task groups are parameter-disjoint") {
  auto cfg = six_layer_config();
  LoraSpec spec;
  spec.rank = 2;
  auto set = attach_task_primary<float>(cfg, spec, {TaskId::kNer, TaskId::kTc}, 1);
  std::set<std::string> ner_names, tc_names;
  for (auto* p : set.parameters(TaskId::kNer)) ner_names.insert(p->name);
  for (auto* p : set.parameters(TaskId::kTc)) tc_names.insert(p->name);
  for (const auto& n : ner_names) CHECK(tc_names.count(n) == 0);
  CHECK(!ner_names.empty());
}

TEST_CASE("NER-only attach leaves TC forward equal to the backbone") {
  auto cfg = six_layer_config();
  auto params = EncoderParams<float>::init(cfg);
  LoraSpec spec;
  spec.rank = 2;
  auto set = attach_task_primary<float>(cfg, spec, {TaskId::kNer}, 1);
  CHECK(set.tc.empty());
  TokenBatch batch = tiny_batch();
  Mat<float> plain = encode_tokens_eval(batch, params);
  Mat<float> with_tc = encode_tokens_eval(batch, params, &set, TaskId::kTc);
  CHECK(plain == with_tc);
}

TEST_CASE("fresh adapters leave the encoder output unchanged within 1e-7") {
  auto cfg = six_layer_config();
  auto params = EncoderParams<float>::init(cfg);
  LoraSpec spec;
  spec.rank = 4;
  auto set = attach_task_primary<float>(cfg, spec, {TaskId::kNer, TaskId::kTc}, 2);
  TokenBatch batch = tiny_batch();
  Mat<float> plain = encode_tokens_eval(batch, params);
  Mat<float> ner = encode_tokens_eval(batch, params, &set, TaskId::kNer);
  CHECK((plain - ner).cwiseAbs().maxCoeff() < 1e-7f);
}
