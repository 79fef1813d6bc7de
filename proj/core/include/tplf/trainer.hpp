#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tplf/batching.hpp"
#include "tplf/encoder.hpp"
#include "tplf/metrics.hpp"
#include "tplf/objectives.hpp"
#include "tplf/optimizer.hpp"
#include "tplf/pcgrad.hpp"

namespace tplf {

enum class TrainMode { kPfNer, kPfTc, kMtpf, kMtpfTpl, kPfL };

inline const char* train_mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::kPfNer: return "PF-NER";
    case TrainMode::kPfTc: return "PF-TC";
    case TrainMode::kMtpf: return "MTPF";
    case TrainMode::kMtpfTpl: return "MTPF-TPL";
    case TrainMode::kPfL: return "PF-L";
  }
  return "?";
}

inline std::optional<TrainMode> train_mode_from_name(const std::string& s) {
  for (TrainMode m : {TrainMode::kPfNer, TrainMode::kPfTc, TrainMode::kMtpf, TrainMode::kMtpfTpl,
                      TrainMode::kPfL})
    if (s == train_mode_name(m)) return m;
  return std::nullopt;
}

struct TrainPlan {
  TrainMode mode = TrainMode::kMtpfTpl;
  bool pcgrad = false;
  int tpl_layers = 2;  // -1 means every layer
  double w_ner = 1.0;
  double w_tc = 1.0;
  int batch_ner = 256;
  int batch_tc = 1024;
  int64_t total_steps = 100;
  uint64_t seed = 0;
  bool alternating = false;  // ablation: alternate task steps instead of summing
  double temperature = 0.05;
  OptimizerConfig optimizer;
  LoraSpec tpl_spec;  // rank/alpha/projections for pre-finetuning adapters

  bool uses_ner() const { return mode != TrainMode::kPfTc; }
  bool uses_tc() const { return mode != TrainMode::kPfNer; }
  bool uses_adapters() const { return mode == TrainMode::kMtpfTpl || mode == TrainMode::kPfL; }
  bool multi_task() const { return uses_ner() && uses_tc(); }

  void validate() const {
    if (total_steps < 1) throw ConfigError("TrainPlan: total_steps must be >= 1");
    if (batch_ner < 1 || batch_tc < 1) throw ConfigError("TrainPlan: batch sizes must be >= 1");
    if (temperature <= 0.0) throw ConfigError("TrainPlan: temperature must be > 0");
    optimizer.validate();
    if (pcgrad && !multi_task())
      throw ConfigError("TrainPlan: pcgrad applies only to multi-task modes");
    if (!uses_adapters() && tpl_layers != 2)
      throw ConfigError("TrainPlan: tpl_layers applies only to MTPF-TPL / PF-L");
    if (uses_adapters() && tpl_layers == 0)
      throw ConfigError("TrainPlan: tpl_layers must be >= 1 or -1 (all)");
  }
};

// Gradients of one optimizer step, partitioned by role.
enum class ParamPartition { kBackbone, kNerTpl, kTcTpl, kHead };

inline ParamPartition partition_of(const std::string& param_name) {
  if (param_name.rfind("encoder.", 0) == 0) return ParamPartition::kBackbone;
  if (param_name.rfind("tpl.ner.", 0) == 0) return ParamPartition::kNerTpl;
  if (param_name.rfind("tpl.tc.", 0) == 0) return ParamPartition::kTcTpl;
  if (param_name.rfind("head.", 0) == 0) return ParamPartition::kHead;
  throw ConfigError("partition_of: unrecognized parameter " + param_name);
}

template <class S>
struct GradientSet {
  std::vector<std::pair<Parameter<S>*, Mat<S>>> entries;

  void add(Parameter<S>* p, Mat<S> g) { entries.emplace_back(p, std::move(g)); }
};

namespace detail {

// Flattens the backbone slices of two per-task gradient maps, projects with
// PCGrad, and writes the projected values back.
template <class S>
void pcgrad_on_backbone(std::map<std::string, Mat<S>>& g_ner, std::map<std::string, Mat<S>>& g_tc,
                        const std::vector<Parameter<S>*>& backbone) {
  Eigen::Index total = 0;
  for (Parameter<S>* p : backbone) total += p->value.size();
  Mat<S> fa(1, total), fb(1, total);
  Eigen::Index at = 0;
  for (Parameter<S>* p : backbone) {
    const Mat<S>& ga = g_ner.at(p->name);
    const Mat<S>& gb = g_tc.at(p->name);
    for (Eigen::Index i = 0; i < ga.size(); ++i) {
      fa(0, at + i) = ga.data()[i];
      fb(0, at + i) = gb.data()[i];
    }
    at += ga.size();
  }
  auto [pa, pb] = pcgrad_project<S>(fa, fb);
  at = 0;
  for (Parameter<S>* p : backbone) {
    Mat<S>& ga = g_ner.at(p->name);
    Mat<S>& gb = g_tc.at(p->name);
    for (Eigen::Index i = 0; i < ga.size(); ++i) {
      ga.data()[i] = pa(0, at + i);
      gb.data()[i] = pb(0, at + i);
    }
    at += ga.size();
  }
}

}  // namespace detail

template <class S>
struct StepResult {
  double loss_ner = 0.0;
  double loss_tc = 0.0;
  bool applied = false;
  std::string diagnostic;  // set when the step was aborted
};

// Owns the mutable training state for one plan: encoder, optional adapters,
// NER head, and optimizer. One trainer mutates the parameters; everything
// else sees them read-only between steps.
template <class S>
class MtpfTrainer {
 public:
  MtpfTrainer(TrainPlan plan, EncoderParams<S>* encoder, TaskPrimaryAdapterSet<S>* adapters,
              LinearHead<S>* ner_head)
      : plan_(plan), encoder_(encoder), adapters_(adapters), ner_head_(ner_head),
        opt_(plan.optimizer), dropout_rng_(plan.seed ^ 0x9e3779b97f4a7c15ull) {
    plan_.validate();
    if (encoder_ == nullptr) throw ConfigError("MtpfTrainer: encoder required");
    if (plan_.uses_adapters() && adapters_ == nullptr)
      throw ConfigError("MtpfTrainer: plan requires adapters");
    if (plan_.uses_ner() && ner_head_ == nullptr)
      throw ConfigError("MtpfTrainer: NER modes require a head");
  }

  const TrainPlan& plan() const { return plan_; }
  AdamW<S>& optimizer() { return opt_; }
  Rng& dropout_rng() { return dropout_rng_; }
  int64_t steps_taken() const { return steps_; }
  void set_steps_taken(int64_t s) { steps_ = s; }

  // Builds both task losses on one graph, routes gradients, and applies one
  // optimizer update. Either batch pointer may be null when the plan does not
  // use that task.
  StepResult<S> step(const TokenLabeledBatch* ner_batch, const ContrastiveBatch* tc_batch) {
    StepResult<S> res;
    const bool do_ner = plan_.uses_ner() && !(plan_.alternating && steps_ % 2 == 1);
    const bool do_tc = plan_.uses_tc() && !(plan_.alternating && steps_ % 2 == 0);
    if (do_ner && ner_batch == nullptr) throw ConfigError("step: plan needs a NER batch");
    if (do_tc && tc_batch == nullptr) throw ConfigError("step: plan needs a TC batch");

    Graph<S> g;
    typename Graph<S>::Var loss_ner, loss_tc;

    EncodeOptions<S> opt;
    opt.train = true;
    opt.dropout_rng = &dropout_rng_;
    if (do_ner) {
      opt.adapters = plan_.uses_adapters() ? adapters_ : nullptr;
      opt.active_task = plan_.uses_adapters() ? std::optional<TaskId>(TaskId::kNer) : std::nullopt;
      auto tokens = encode_tokens(g, ner_batch->tokens, *encoder_, opt);
      auto logits = ner_linear_head(g, tokens, *ner_head_);
      loss_ner = token_cross_entropy(g, logits, ner_batch->flat_labels());
      res.loss_ner = static_cast<double>(g.value(loss_ner)(0, 0));
    }
    if (do_tc) {
      opt.adapters = plan_.uses_adapters() ? adapters_ : nullptr;
      opt.active_task = plan_.uses_adapters() ? std::optional<TaskId>(TaskId::kTc) : std::nullopt;
      auto za = g.l2_normalize_rows(g.mean_pool_rows(
          encode_tokens(g, tc_batch->anchors, *encoder_, opt), tc_batch->anchors.attention_mask));
      auto zp = g.l2_normalize_rows(g.mean_pool_rows(
          encode_tokens(g, tc_batch->positives, *encoder_, opt), tc_batch->positives.attention_mask));
      loss_tc = info_nce(g, za, zp, plan_.temperature);
      res.loss_tc = static_cast<double>(g.value(loss_tc)(0, 0));
    }
    if (!std::isfinite(res.loss_ner) || !std::isfinite(res.loss_tc)) {
      res.diagnostic = "non-finite loss, step aborted";
      return res;
    }

    std::map<std::string, Mat<S>> g_ner, g_tc;
    if (do_ner) {
      g.backward(loss_ner);
      collect(g, g_ner);
      g.zero_grad();
    }
    if (do_tc) {
      g.backward(loss_tc);
      collect(g, g_tc);
      g.zero_grad();
    }

    auto backbone = encoder_->parameters();
    if (do_ner && do_tc) {
      for (Parameter<S>* p : backbone) {
        if (!g_ner.count(p->name)) g_ner[p->name] = Mat<S>::Zero(p->value.rows(), p->value.cols());
        if (!g_tc.count(p->name)) g_tc[p->name] = Mat<S>::Zero(p->value.rows(), p->value.cols());
      }
      if (plan_.pcgrad) detail::pcgrad_on_backbone<S>(g_ner, g_tc, backbone);
    }

    GradientSet<S> grads;
    const bool update_backbone = plan_.mode != TrainMode::kPfL;
    if (update_backbone) {
      for (Parameter<S>* p : backbone) {
        Mat<S> combined = Mat<S>::Zero(p->value.rows(), p->value.cols());
        if (auto it = g_ner.find(p->name); it != g_ner.end())
          combined += S(plan_.w_ner) * it->second;
        if (auto it = g_tc.find(p->name); it != g_tc.end()) combined += S(plan_.w_tc) * it->second;
        grads.add(p, std::move(combined));
      }
    }
    if (plan_.uses_adapters()) {
      for (Parameter<S>* p : adapters_->parameters(TaskId::kNer))
        if (auto it = g_ner.find(p->name); it != g_ner.end())
          grads.add(p, Mat<S>(S(plan_.w_ner) * it->second));
      for (Parameter<S>* p : adapters_->parameters(TaskId::kTc))
        if (auto it = g_tc.find(p->name); it != g_tc.end())
          grads.add(p, Mat<S>(S(plan_.w_tc) * it->second));
    }
    if (do_ner) {
      for (Parameter<S>* p : ner_head_->parameters())
        if (auto it = g_ner.find(p->name); it != g_ner.end())
          grads.add(p, Mat<S>(S(plan_.w_ner) * it->second));
    }

    last_grad_ner_ = std::move(g_ner);
    last_grad_tc_ = std::move(g_tc);
    opt_.step(grads.entries);
    ++steps_;
    res.applied = true;
    return res;
  }

  // Raw per-task gradients of the last step, for routing assertions.
  const std::map<std::string, Mat<S>>& last_ner_gradients() const { return last_grad_ner_; }
  const std::map<std::string, Mat<S>>& last_tc_gradients() const { return last_grad_tc_; }

  // Routing exactness: no TC-TPL parameter may appear in the NER gradients
  // and vice versa. Structural by construction; asserted on demand.
  void assert_routing_exact() const {
    for (const auto& [name, grad] : last_grad_ner_)
      if (partition_of(name) == ParamPartition::kTcTpl && !grad.isZero())
        throw NumericError("routing violation: NER loss reached " + name);
    for (const auto& [name, grad] : last_grad_tc_) {
      ParamPartition part = partition_of(name);
      if ((part == ParamPartition::kNerTpl || part == ParamPartition::kHead) && !grad.isZero())
        throw NumericError("routing violation: TC loss reached " + name);
    }
  }

 private:
  void collect(Graph<S>& g, std::map<std::string, Mat<S>>& out) {
    auto grab = [&](Parameter<S>* p) {
      if (g.has_grad(*p)) out[p->name] = g.grad(*p);
    };
    for (Parameter<S>* p : encoder_->parameters()) grab(p);
    if (adapters_)
      for (Parameter<S>* p : adapters_->parameters()) grab(p);
    if (ner_head_)
      for (Parameter<S>* p : ner_head_->parameters()) grab(p);
  }

  TrainPlan plan_;
  EncoderParams<S>* encoder_;
  TaskPrimaryAdapterSet<S>* adapters_;
  LinearHead<S>* ner_head_;
  AdamW<S> opt_;
  Rng dropout_rng_;
  int64_t steps_ = 0;
  std::map<std::string, Mat<S>> last_grad_ner_, last_grad_tc_;
};

// Uniform dataset choice, then a uniform batch from it; datasets smaller
// than the batch are sampled with replacement.
template <class Item>
std::vector<const Item*> hierarchical_sample(const std::vector<std::vector<Item>>& registry,
                                             int batch_size, Rng& rng) {
  if (registry.empty()) throw ConfigError("hierarchical_sample: empty registry");
  for (const auto& ds : registry)
    if (ds.empty()) throw ConfigError("hierarchical_sample: empty dataset in registry");
  std::uniform_int_distribution<size_t> pick_ds(0, registry.size() - 1);
  const auto& ds = registry[pick_ds(rng)];
  std::vector<const Item*> out;
  out.reserve(static_cast<size_t>(batch_size));
  if (ds.size() >= static_cast<size_t>(batch_size)) {
    std::vector<size_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (int i = 0; i < batch_size; ++i) out.push_back(&ds[idx[static_cast<size_t>(i)]]);
  } else {
    std::uniform_int_distribution<size_t> pick(0, ds.size() - 1);
    for (int i = 0; i < batch_size; ++i) out.push_back(&ds[pick(rng)]);
  }
  return out;
}

}  // namespace tplf
