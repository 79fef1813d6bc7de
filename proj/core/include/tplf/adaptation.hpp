#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "tplf/batching.hpp"
#include "tplf/encoder.hpp"
#include "tplf/metrics.hpp"
#include "tplf/trainer.hpp"

namespace tplf {

// Downstream NER recipe: LoRA on query/key and the MLP projections of every
// layer, rank 32, alpha 64; head warm-up epochs with everything else frozen,
// then joint epochs of head + LoRA.
struct AdaptNerConfig {
  LoraSpec lora;  // empty target_layers resolves to every layer here
  int warmup_epochs = 10;
  int joint_epochs = 30;
  int batch_size = 64;
  OptimizerConfig optimizer;
  bool update_backbone = false;  // backbone updates in stage 2; both paths available
  uint64_t seed = 0;

  AdaptNerConfig() {
    lora.rank = 32;
    lora.alpha = 64.0;
  }
};

// Copies a pre-finetuned module into the leading rank block of a fresh
// downstream module. With matching alpha/rank ratios the initial adapter
// delta equals the pre-finetuned one.
template <class S>
void init_lora_from_tpl(LoraModule<S>& fresh, const LoraModule<S>& tpl) {
  if (tpl.A.value.cols() != fresh.A.value.cols() || tpl.B.value.rows() != fresh.B.value.rows())
    throw ConfigError("init_lora_from_tpl: incompatible dims for " + fresh.A.name);
  const int r = std::min(tpl.rank, fresh.rank);
  fresh.A.value.topRows(r) = tpl.A.value.topRows(r);
  fresh.B.value.leftCols(r) = tpl.B.value.leftCols(r);
}

template <class S>
struct AdaptNerResult {
  TaskPrimaryAdapterSet<S> adapters;  // NER group only
  LinearHead<S> head;
  double stage1_train_f1 = 0.0;
  double stage2_train_f1 = 0.0;
};

// Word-level predictions for a whole dataset (eval mode, batched).
template <class S>
std::vector<std::vector<std::string>> predict_tags(EncoderParams<S>& params,
                                                   TaskPrimaryAdapterSet<S>* adapters,
                                                   LinearHead<S>& head, const NerDataset& ds,
                                                   const Tokenizer& tok, int batch_size = 64) {
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> head_labels = ds.label_names;
  if (static_cast<int>(head_labels.size()) != head.num_classes())
    throw DataError("predict_tags: head classes differ from dataset labels");
  for (size_t start = 0; start < ds.sentences.size(); start += static_cast<size_t>(batch_size)) {
    size_t stop = std::min(ds.sentences.size(), start + static_cast<size_t>(batch_size));
    std::vector<std::vector<std::string>> words;
    for (size_t i = start; i < stop; ++i) words.push_back(ds.sentences[i].words);
    TokenBatch batch = tok.encode(words, params.config.max_seq_len);
    Mat<S> tokens = encode_tokens_eval(batch, params, adapters,
                                       adapters ? std::optional<TaskId>(TaskId::kNer) : std::nullopt);
    Mat<float> logits = (tokens * head.weight.value.transpose()).template cast<float>();
    logits.rowwise() += head.bias.value.row(0).template cast<float>();
    auto tags = decode_word_predictions(logits, batch, head_labels);
    out.insert(out.end(), tags.begin(), tags.end());
  }
  return out;
}

template <class S>
double train_f1(EncoderParams<S>& params, TaskPrimaryAdapterSet<S>* adapters, LinearHead<S>& head,
                const NerDataset& ds, const Tokenizer& tok) {
  auto pred = predict_tags(params, adapters, head, ds, tok);
  std::vector<std::vector<std::string>> gold;
  std::vector<std::vector<std::string>> pred_trunc;
  for (size_t i = 0; i < ds.sentences.size(); ++i) {
    // truncation can shorten predictions; compare over the covered prefix
    size_t n = pred[i].size();
    gold.emplace_back(ds.sentences[i].tags.begin(), ds.sentences[i].tags.begin() + static_cast<long>(n));
    pred_trunc.push_back(pred[i]);
  }
  return span_f1(pred_trunc, gold).f1;
}

// Two-stage downstream adaptation. tpl, when given, initializes the LoRA
// modules on its layers; everything else starts fresh.
template <class S>
AdaptNerResult<S> adapt_ner(EncoderParams<S>& backbone, const TaskPrimaryAdapterSet<S>* tpl,
                            const NerDataset& train, const Tokenizer& tok, AdaptNerConfig cfg) {
  if (train.scheme != TagScheme::kBio) throw DataError("adapt_ner: needs a BIO-tagged dataset");
  if (cfg.lora.target_layers.empty())
    cfg.lora.target_layers = LoraSpec::last_n_layers(backbone.config.num_layers,
                                                     backbone.config.num_layers);
  AdaptNerResult<S> res;
  res.adapters =
      attach_task_primary<S>(backbone.config, cfg.lora, {TaskId::kNer}, cfg.seed ^ 0x51eb851f);
  if (tpl) {
    for (auto& [key, fresh] : res.adapters.group(TaskId::kNer)) {
      const auto& tpl_group = tpl->group(TaskId::kNer);
      auto it = tpl_group.find(key);
      if (it != tpl_group.end()) init_lora_from_tpl(fresh, it->second);
    }
  }
  Rng rng(cfg.seed);
  res.head = LinearHead<S>::init("head.ner", static_cast<int>(train.label_names.size()),
                                 backbone.config.hidden_dim, rng);

  AdamW<S> opt(cfg.optimizer);
  Rng dropout_rng(cfg.seed ^ 0xa5a5a5a5ull);
  std::vector<size_t> order(train.sentences.size());
  std::iota(order.begin(), order.end(), 0);

  auto run_epochs = [&](int epochs, bool train_lora) {
    for (int e = 0; e < epochs; ++e) {
      std::shuffle(order.begin(), order.end(), rng);
      for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
        size_t stop = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
        std::vector<const NerSentence*> sents;
        for (size_t i = start; i < stop; ++i) sents.push_back(&train.sentences[order[i]]);
        TokenLabeledBatch batch =
            make_token_labeled_batch(sents, tok, backbone.config.max_seq_len, train.label_names,
                                     SubtokenLabeling::kFirstSubtoken);
        Graph<S> g;
        EncodeOptions<S> eopt;
        eopt.adapters = &res.adapters;
        eopt.active_task = TaskId::kNer;
        eopt.train = true;
        eopt.dropout_rng = &dropout_rng;
        auto tokens = encode_tokens(g, batch.tokens, backbone, eopt);
        auto logits = ner_linear_head(g, tokens, res.head);
        auto loss = token_cross_entropy(g, logits, batch.flat_labels());
        g.backward(loss);
        GradientSet<S> grads;
        for (Parameter<S>* p : res.head.parameters())
          if (g.has_grad(*p)) grads.add(p, g.grad(*p));
        if (train_lora) {
          for (Parameter<S>* p : res.adapters.parameters(TaskId::kNer))
            if (g.has_grad(*p)) grads.add(p, g.grad(*p));
          if (cfg.update_backbone)
            for (Parameter<S>* p : backbone.parameters())
              if (g.has_grad(*p)) grads.add(p, g.grad(*p));
        }
        opt.step(grads.entries);
      }
    }
  };

  run_epochs(cfg.warmup_epochs, /*train_lora=*/false);
  res.stage1_train_f1 = train_f1(backbone, &res.adapters, res.head, train, tok);
  run_epochs(cfg.joint_epochs, /*train_lora=*/true);
  res.stage2_train_f1 = train_f1(backbone, &res.adapters, res.head, train, tok);
  return res;
}

struct ProbeConfig {
  int epochs = 400;
  double learning_rate = 0.1;
  double weight_decay = 0.0;
  uint64_t seed = 0;
};

struct ProbeResult {
  LinearHead<float> head;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  bool degenerate = false;  // single-class training set
};

// Multinomial logistic regression on fixed features, fitted full-batch with
// the module's own optimizer.
ProbeResult fit_linear_probe(const Mat<float>& x_train, const std::vector<int>& y_train,
                             const Mat<float>& x_test, const std::vector<int>& y_test,
                             int num_classes, const ProbeConfig& cfg);

inline double probe_accuracy(const LinearHead<float>& head, const Mat<float>& x,
                             const std::vector<int>& y) {
  if (x.rows() == 0) return 0.0;
  int correct = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Index best;
    (head.weight.value * x.row(i).transpose() + head.bias.value.transpose()).maxCoeff(&best);
    if (static_cast<int>(best) == y[static_cast<size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(x.rows());
}

// Frozen-backbone text embeddings: mean-pooled, L2-normalized, TC adapters
// active when given.
template <class S>
Mat<S> embed_texts(const std::vector<std::string>& texts, EncoderParams<S>& params,
                   const Tokenizer& tok, TaskPrimaryAdapterSet<S>* adapters = nullptr,
                   int batch_size = 64) {
  Mat<S> out(static_cast<Eigen::Index>(texts.size()), params.config.hidden_dim);
  for (size_t start = 0; start < texts.size(); start += static_cast<size_t>(batch_size)) {
    size_t stop = std::min(texts.size(), start + static_cast<size_t>(batch_size));
    std::vector<std::vector<std::string>> words;
    for (size_t i = start; i < stop; ++i) words.push_back(split_whitespace(texts[i]));
    TokenBatch batch = tok.encode(words, params.config.max_seq_len);
    Mat<S> tokens = encode_tokens_eval(batch, params, adapters,
                                       adapters ? std::optional<TaskId>(TaskId::kTc) : std::nullopt);
    Mat<S> pooled = l2_normalize(pool_mean(tokens, batch.attention_mask));
    out.middleRows(static_cast<Eigen::Index>(start), pooled.rows()) = pooled;
  }
  return out;
}

// MTEB-style evaluation: logistic regression on frozen embeddings.
template <class S>
ProbeResult adapt_tc(EncoderParams<S>& backbone, TaskPrimaryAdapterSet<S>* adapters,
                     const LabeledTextDataset& train, const LabeledTextDataset& test,
                     const Tokenizer& tok, const ProbeConfig& cfg = {}) {
  std::vector<std::string> texts;
  std::vector<int> y_train, y_test;
  for (const auto& item : train.items) {
    texts.push_back(item.text);
    y_train.push_back(train.label_id(item.label));
  }
  Mat<float> x_train = embed_texts(texts, backbone, tok, adapters).template cast<float>();
  texts.clear();
  for (const auto& item : test.items) {
    texts.push_back(item.text);
    y_test.push_back(train.label_id(item.label));
  }
  Mat<float> x_test = embed_texts(texts, backbone, tok, adapters).template cast<float>();
  return fit_linear_probe(x_train, y_train, x_test, y_test,
                          static_cast<int>(train.label_names.size()), cfg);
}

}  // namespace tplf
