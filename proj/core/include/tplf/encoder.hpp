#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tplf/graph.hpp"
#include "tplf/lora.hpp"
#include "tplf/token_batch.hpp"

namespace tplf {

struct EncoderConfig {
  int num_layers = 2;
  int hidden_dim = 32;
  int num_heads = 4;
  int ffn_dim = 64;
  int vocab_size = 64;
  int max_seq_len = 64;
  double dropout_rate = 0.1;
  uint64_t seed = 0;

  void validate() const {
    if (num_layers < 0) throw ConfigError("EncoderConfig: num_layers must be >= 0");
    if (hidden_dim <= 0 || num_heads <= 0 || hidden_dim % num_heads != 0)
      throw ConfigError("EncoderConfig: hidden_dim must be divisible by num_heads");
    if (ffn_dim <= 0) throw ConfigError("EncoderConfig: ffn_dim must be positive");
    if (max_seq_len < 1) throw ConfigError("EncoderConfig: max_seq_len must be >= 1");
    if (vocab_size < 4) throw ConfigError("EncoderConfig: vocab_size must cover reserved ids");
    if (dropout_rate < 0.0 || dropout_rate > 1.0)
      throw ConfigError("EncoderConfig: dropout_rate must be in [0,1]");
  }
};

template <class S>
struct EncoderLayerParams {
  Parameter<S> wq, bq, wk, bk, wv, bv, wo, bo;
  Parameter<S> ln1_gain, ln1_bias;
  Parameter<S> w1, b1, w2, b2;
  Parameter<S> ln2_gain, ln2_bias;

  std::vector<Parameter<S>*> parameters() {
    return {&wq, &bq, &wk, &bk, &wv, &bv, &wo, &bo, &ln1_gain, &ln1_bias,
            &w1, &b1, &w2, &b2, &ln2_gain, &ln2_bias};
  }
};

template <class S>
struct EncoderParams {
  EncoderConfig config;
  Parameter<S> token_embeddings;     // vocab x hidden
  Parameter<S> position_embeddings;  // max_seq x hidden
  std::vector<EncoderLayerParams<S>> layers;

  static EncoderParams init(const EncoderConfig& cfg) {
    cfg.validate();
    EncoderParams p;
    p.config = cfg;
    Rng rng(cfg.seed);
    const int H = cfg.hidden_dim, F = cfg.ffn_dim;
    auto w = [&](const std::string& name, int rows, int cols) {
      return Parameter<S>(name, truncated_normal<S>(rows, cols, 0.02, rng));
    };
    auto zeros = [](const std::string& name, int rows, int cols) {
      return Parameter<S>(name, Mat<S>::Zero(rows, cols));
    };
    auto ones = [](const std::string& name, int cols) {
      return Parameter<S>(name, Mat<S>::Ones(1, cols));
    };
    p.token_embeddings = w("encoder.embed.token", cfg.vocab_size, H);
    p.position_embeddings = w("encoder.embed.position", cfg.max_seq_len, H);
    for (int l = 0; l < cfg.num_layers; ++l) {
      std::string pre = "encoder.layer" + std::to_string(l) + ".";
      EncoderLayerParams<S> lp;
      lp.wq = w(pre + "attn.q.w", H, H);
      lp.bq = zeros(pre + "attn.q.b", 1, H);
      lp.wk = w(pre + "attn.k.w", H, H);
      lp.bk = zeros(pre + "attn.k.b", 1, H);
      lp.wv = w(pre + "attn.v.w", H, H);
      lp.bv = zeros(pre + "attn.v.b", 1, H);
      lp.wo = w(pre + "attn.out.w", H, H);
      lp.bo = zeros(pre + "attn.out.b", 1, H);
      lp.ln1_gain = ones(pre + "ln1.gain", H);
      lp.ln1_bias = zeros(pre + "ln1.bias", 1, H);
      lp.w1 = w(pre + "ffn.in.w", F, H);
      lp.b1 = zeros(pre + "ffn.in.b", 1, F);
      lp.w2 = w(pre + "ffn.out.w", H, F);
      lp.b2 = zeros(pre + "ffn.out.b", 1, H);
      lp.ln2_gain = ones(pre + "ln2.gain", H);
      lp.ln2_bias = zeros(pre + "ln2.bias", 1, H);
      p.layers.push_back(std::move(lp));
    }
    return p;
  }

  std::vector<Parameter<S>*> parameters() {
    std::vector<Parameter<S>*> out{&token_embeddings, &position_embeddings};
    for (auto& l : layers) {
      auto lp = l.parameters();
      out.insert(out.end(), lp.begin(), lp.end());
    }
    return out;
  }

  void validate_finite() {
    for (const Parameter<S>* p : parameters())
      if (!p->value.allFinite())
        throw NumericError("EncoderParams: non-finite values in " + p->name);
  }

  template <class T>
  EncoderParams<T> cast() {
    EncoderParams<T> out;
    out.config = config;
    out.token_embeddings = {token_embeddings.name, token_embeddings.value.template cast<T>()};
    out.position_embeddings = {position_embeddings.name,
                               position_embeddings.value.template cast<T>()};
    for (auto& l : layers) {
      EncoderLayerParams<T> lt;
      auto src = l.parameters();
      auto dst = lt.parameters();
      for (size_t i = 0; i < src.size(); ++i)
        *dst[i] = {src[i]->name, src[i]->value.template cast<T>()};
      out.layers.push_back(std::move(lt));
    }
    return out;
  }
};

template <class S>
struct EncodeOptions {
  TaskPrimaryAdapterSet<S>* adapters = nullptr;
  std::optional<TaskId> active_task;
  bool train = false;
  Rng* dropout_rng = nullptr;
};

namespace detail {

template <class S>
typename Graph<S>::Var projected(Graph<S>& g, typename Graph<S>::Var x, Parameter<S>& w,
                                 Parameter<S>& b, int layer, Projection proj,
                                 const EncodeOptions<S>& opt) {
  auto y = g.add_rowvec(g.matmul_t(x, g.param(w)), g.param(b));
  if (opt.adapters && opt.active_task) {
    if (LoraModule<S>* m = opt.adapters->find(*opt.active_task, layer, proj))
      y = lora_forward(g, y, x, *m);
  }
  return y;
}

}  // namespace detail

// Forward pass over the whole batch. Returns per-token embeddings laid out as
// (batch*seq) x hidden. With adapters attached, only the active task's LoRA
// group enters the graph, so the other group's gradients are structurally zero.
template <class S>
typename Graph<S>::Var encode_tokens(Graph<S>& g, const TokenBatch& batch,
                                     EncoderParams<S>& params,
                                     const EncodeOptions<S>& opt = {}) {
  const EncoderConfig& cfg = params.config;
  batch.validate(cfg.vocab_size);
  if (batch.seq_len() > cfg.max_seq_len)
    throw ConfigError("encode_tokens: sequence longer than max_seq_len");
  const bool drop = opt.train && cfg.dropout_rate > 0.0;
  if (drop && opt.dropout_rng == nullptr)
    throw ConfigError("encode_tokens: train mode with dropout needs an rng");

  const Eigen::Index B = batch.batch(), T = batch.seq_len();
  std::vector<int> tok_ids(static_cast<size_t>(B * T));
  std::vector<int> pos_ids(static_cast<size_t>(B * T));
  for (Eigen::Index b = 0; b < B; ++b)
    for (Eigen::Index s = 0; s < T; ++s) {
      tok_ids[static_cast<size_t>(b * T + s)] = batch.token_ids(b, s);
      pos_ids[static_cast<size_t>(b * T + s)] = static_cast<int>(s);
    }
  auto x = g.add(g.embedding_lookup(params.token_embeddings, tok_ids),
                 g.embedding_lookup(params.position_embeddings, pos_ids));

  for (int l = 0; l < cfg.num_layers; ++l) {
    auto& lp = params.layers[static_cast<size_t>(l)];
    auto q = detail::projected(g, x, lp.wq, lp.bq, l, Projection::kQuery, opt);
    auto k = detail::projected(g, x, lp.wk, lp.bk, l, Projection::kKey, opt);
    auto v = detail::projected(g, x, lp.wv, lp.bv, l, Projection::kValue, opt);
    auto ctx = g.self_attention(q, k, v, batch.attention_mask, cfg.num_heads);
    auto attn = detail::projected(g, ctx, lp.wo, lp.bo, l, Projection::kOutput, opt);
    if (drop) attn = g.dropout(attn, cfg.dropout_rate, *opt.dropout_rng);
    x = g.layer_norm(g.add(x, attn), g.param(lp.ln1_gain), g.param(lp.ln1_bias));

    auto h = g.gelu(detail::projected(g, x, lp.w1, lp.b1, l, Projection::kFfnIn, opt));
    auto f = detail::projected(g, h, lp.w2, lp.b2, l, Projection::kFfnOut, opt);
    if (drop) f = g.dropout(f, cfg.dropout_rate, *opt.dropout_rng);
    x = g.layer_norm(g.add(x, f), g.param(lp.ln2_gain), g.param(lp.ln2_bias));

    if (!g.value(x).allFinite())
      throw NumericError("encode_tokens: non-finite activations after layer " + std::to_string(l));
  }
  return x;
}

// Eval-mode convenience: deterministic, no gradients.
template <class S>
Mat<S> encode_tokens_eval(const TokenBatch& batch, EncoderParams<S>& params,
                          TaskPrimaryAdapterSet<S>* adapters = nullptr,
                          std::optional<TaskId> active_task = std::nullopt) {
  Graph<S> g;
  EncodeOptions<S> opt;
  opt.adapters = adapters;
  opt.active_task = active_task;
  return g.value(encode_tokens(g, batch, params, opt));
}

// Mean over positions with mask==1. tokens: (batch*seq) x H.
template <class S>
Mat<S> pool_mean(const Mat<S>& tokens, const MatI& mask) {
  const Eigen::Index B = mask.rows(), T = mask.cols();
  if (tokens.rows() != B * T) throw ConfigError("pool_mean: tokens/mask disagree");
  Mat<S> out = Mat<S>::Zero(B, tokens.cols());
  for (Eigen::Index b = 0; b < B; ++b) {
    int c = 0;
    for (Eigen::Index s = 0; s < T; ++s)
      if (mask(b, s) != 0) {
        out.row(b) += tokens.row(b * T + s);
        ++c;
      }
    if (c == 0) throw DataError("pool_mean: empty sequence at row " + std::to_string(b));
    out.row(b) /= static_cast<S>(c);
  }
  return out;
}

template <class S>
Mat<S> l2_normalize(const Mat<S>& v) {
  Mat<S> out(v.rows(), v.cols());
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    S n = v.row(r).norm();
    if (n <= S(kNormEps)) throw NumericError("degenerate embedding: row " + std::to_string(r));
    out.row(r) = v.row(r) / n;
  }
  return out;
}

template <class S>
S cosine_similarity(const Mat<S>& u, const Mat<S>& v) {
  if (u.size() != v.size()) throw ConfigError("cosine_similarity: size mismatch");
  S nu = u.norm(), nv = v.norm();
  if (nu <= S(kNormEps) || nv <= S(kNormEps))
    throw NumericError("cosine_similarity: degenerate norm");
  Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>> fu(u.data(), u.size());
  Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>> fv(v.data(), v.size());
  return fu.dot(fv) / (nu * nv);
}

// Builds disjoint per-task LoRA groups for the requested tasks. An empty
// spec.target_layers means the last two layers.
template <class S>
TaskPrimaryAdapterSet<S> attach_task_primary(const EncoderConfig& cfg, LoraSpec spec,
                                             const std::vector<TaskId>& tasks, uint64_t seed) {
  if (spec.target_layers.empty())
    spec.target_layers = LoraSpec::last_n_layers(cfg.num_layers, 2);
  spec.validate(cfg.num_layers);
  TaskPrimaryAdapterSet<S> set;
  set.spec = spec;
  Rng rng(seed);
  std::set<std::string> names;
  for (TaskId task : tasks) {
    for (int layer : spec.target_layers) {
      for (Projection proj : spec.target_projections) {
        int in = cfg.hidden_dim, out = cfg.hidden_dim;
        if (proj == Projection::kFfnIn) out = cfg.ffn_dim;
        if (proj == Projection::kFfnOut) in = cfg.ffn_dim;
        std::string prefix = std::string("tpl.") + task_name(task) + ".layer" +
                             std::to_string(layer) + "." + projection_name(proj);
        if (!names.insert(prefix).second)
          throw ConfigError("attach_task_primary: duplicate registration " + prefix);
        set.group(task).emplace(std::make_pair(layer, proj),
                                lora_init<S>(spec, in, out, rng, prefix));
      }
    }
  }
  return set;
}

}  // namespace tplf
