#pragma once

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tplf/graph.hpp"

namespace tplf {

enum class TaskId { kNer, kTc };

inline const char* task_name(TaskId t) { return t == TaskId::kNer ? "ner" : "tc"; }

enum class Projection { kQuery, kKey, kValue, kOutput, kFfnIn, kFfnOut };

inline const char* projection_name(Projection p) {
  switch (p) {
    case Projection::kQuery: return "query";
    case Projection::kKey: return "key";
    case Projection::kValue: return "value";
    case Projection::kOutput: return "output";
    case Projection::kFfnIn: return "ffn_in";
    case Projection::kFfnOut: return "ffn_out";
  }
  return "?";
}

inline std::optional<Projection> projection_from_name(const std::string& name) {
  for (Projection p : {Projection::kQuery, Projection::kKey, Projection::kValue,
                       Projection::kOutput, Projection::kFfnIn, Projection::kFfnOut})
    if (name == projection_name(p)) return p;
  return std::nullopt;
}

// Warnings are recoverable; tests and the CLI can redirect them.
inline std::function<void(const std::string&)>& warning_handler() {
  static std::function<void(const std::string&)> h = [](const std::string& msg) {
    std::cerr << "[tplf] warning: " << msg << "\n";
  };
  return h;
}

inline void warn(const std::string& msg) { warning_handler()(msg); }

struct LoraSpec {
  int rank = 8;
  double alpha = 16.0;
  std::vector<Projection> target_projections = {Projection::kQuery, Projection::kKey,
                                                Projection::kFfnIn, Projection::kFfnOut};
  std::vector<int> target_layers;  // which layers carry adapters
  double init_sigma = 0.02;

  void validate(int num_layers) const {
    if (rank < 1) throw ConfigError("LoraSpec: rank must be >= 1");
    if (alpha <= 0.0) throw ConfigError("LoraSpec: alpha must be > 0");
    if (init_sigma < 0.0) throw ConfigError("LoraSpec: init_sigma must be >= 0");
    for (int l : target_layers)
      if (l < 0 || l >= num_layers)
        throw ConfigError("LoraSpec: target layer " + std::to_string(l) + " out of range");
  }

  static std::vector<int> last_n_layers(int num_layers, int n) {
    std::vector<int> out;
    for (int l = std::max(0, num_layers - n); l < num_layers; ++l) out.push_back(l);
    return out;
  }
};

template <class S>
struct LoraModule {
  Parameter<S> A;  // rank x in_dim
  Parameter<S> B;  // out_dim x rank, zero at init so the adapter starts as a no-op
  int rank = 0;
  double alpha = 0.0;
  bool merged = false;

  S scale() const { return static_cast<S>(alpha / rank); }
};

template <class S>
LoraModule<S> lora_init(const LoraSpec& spec, int in_dim, int out_dim, Rng& rng,
                        const std::string& name_prefix) {
  if (in_dim <= 0 || out_dim <= 0) throw ConfigError("lora_init: dims must be positive");
  if (spec.rank > std::min(in_dim, out_dim))
    warn("lora_init: rank " + std::to_string(spec.rank) + " exceeds min(in,out) at " + name_prefix);
  LoraModule<S> m;
  m.rank = spec.rank;
  m.alpha = spec.alpha;
  Mat<S> a = Mat<S>::Zero(spec.rank, in_dim);
  if (spec.init_sigma > 0.0) {
    std::normal_distribution<double> dist(0.0, spec.init_sigma);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = static_cast<S>(dist(rng));
  }
  m.A = Parameter<S>(name_prefix + ".A", std::move(a));
  m.B = Parameter<S>(name_prefix + ".B", Mat<S>::Zero(out_dim, spec.rank));
  return m;
}

// y = base + (alpha/r) * (x A^T) B^T, the adapter path on a Linear layout
// where x rows are tokens.
template <class S>
typename Graph<S>::Var lora_forward(Graph<S>& g, typename Graph<S>::Var base,
                                    typename Graph<S>::Var x, LoraModule<S>& m) {
  auto u = g.matmul_t(x, g.param(m.A));
  auto d = g.matmul_t(u, g.param(m.B));
  return g.add(base, g.scale(d, m.scale()));
}

// Plain-matrix adapter delta for inference outside a graph.
template <class S>
Mat<S> lora_delta(const LoraModule<S>& m, const Mat<S>& x) {
  return (x * m.A.value.transpose()) * m.B.value.transpose() * m.scale();
}

// W + (alpha/r) B A. Guards against double-merging.
template <class S>
Mat<S> lora_merge(const Mat<S>& base_w, LoraModule<S>& m) {
  if (m.merged) throw ConfigError("lora_merge: already merged");
  if (base_w.rows() != m.B.value.rows() || base_w.cols() != m.A.value.cols())
    throw ConfigError("lora_merge: shape mismatch");
  m.merged = true;
  if (m.alpha == 0.0) return base_w;
  return base_w + m.scale() * (m.B.value * m.A.value);
}

template <class S>
void lora_detach(LoraModule<S>& m) {
  m.merged = false;
}

// One LoRA group per task family. Groups are parameter-disjoint; each module
// is keyed by (layer, projection).
template <class S>
struct TaskPrimaryAdapterSet {
  LoraSpec spec;
  std::map<std::pair<int, Projection>, LoraModule<S>> ner;
  std::map<std::pair<int, Projection>, LoraModule<S>> tc;

  std::map<std::pair<int, Projection>, LoraModule<S>>& group(TaskId t) {
    return t == TaskId::kNer ? ner : tc;
  }
  const std::map<std::pair<int, Projection>, LoraModule<S>>& group(TaskId t) const {
    return t == TaskId::kNer ? ner : tc;
  }

  LoraModule<S>* find(TaskId t, int layer, Projection p) {
    auto& m = group(t);
    auto it = m.find({layer, p});
    return it == m.end() ? nullptr : &it->second;
  }

  std::vector<Parameter<S>*> parameters(TaskId t) {
    std::vector<Parameter<S>*> out;
    for (auto& [key, mod] : group(t)) {
      out.push_back(&mod.A);
      out.push_back(&mod.B);
    }
    return out;
  }

  std::vector<Parameter<S>*> parameters() {
    auto out = parameters(TaskId::kNer);
    auto tcp = parameters(TaskId::kTc);
    out.insert(out.end(), tcp.begin(), tcp.end());
    return out;
  }
};

}  // namespace tplf
