#pragma once

#include <map>
#include <string>
#include <vector>

#include "tplf/graph.hpp"

namespace tplf {

struct OptimizerConfig {
  double learning_rate = 2e-5;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (learning_rate < 0.0) throw ConfigError("OptimizerConfig: learning_rate must be >= 0");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
      throw ConfigError("OptimizerConfig: betas must be in [0,1)");
  }
};

// AdamW: decoupled weight decay applied as theta *= (1 - lr*wd) before the
// bias-corrected moment update. State is keyed by parameter name so it
// serializes into checkpoints.
template <class S>
class AdamW {
 public:
  explicit AdamW(OptimizerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  const OptimizerConfig& config() const { return cfg_; }
  int64_t step_count() const { return step_; }
  int64_t skipped_nonfinite() const { return skipped_; }

  // One update over (parameter, gradient) pairs. Parameters with non-finite
  // gradients are skipped and counted.
  void step(const std::vector<std::pair<Parameter<S>*, Mat<S>>>& grads) {
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (const auto& [param, grad] : grads) {
      if (grad.rows() != param->value.rows() || grad.cols() != param->value.cols())
        throw ConfigError("AdamW: gradient shape mismatch for " + param->name);
      if (!grad.allFinite()) {
        ++skipped_;
        continue;
      }
      Moments& m = moments(*param);
      if (cfg_.weight_decay != 0.0)
        param->value *= S(1.0 - cfg_.learning_rate * cfg_.weight_decay);
      m.first = S(cfg_.beta1) * m.first + S(1.0 - cfg_.beta1) * grad;
      m.second = S(cfg_.beta2) * m.second.array() + S(1.0 - cfg_.beta2) * grad.array().square();
      Mat<S> mhat = m.first / S(bc1);
      Mat<S> vhat = m.second / S(bc2);
      param->value.array() -=
          S(cfg_.learning_rate) * mhat.array() / (vhat.array().sqrt() + S(cfg_.epsilon));
    }
  }

  struct Moments {
    Mat<S> first;
    Mat<S> second;
  };

  // Exposed for checkpointing.
  std::map<std::string, Moments>& state() { return state_; }
  const std::map<std::string, Moments>& state() const { return state_; }
  void set_step_count(int64_t s) { step_ = s; }

 private:
  Moments& moments(const Parameter<S>& p) {
    auto it = state_.find(p.name);
    if (it == state_.end()) {
      Moments m;
      m.first = Mat<S>::Zero(p.value.rows(), p.value.cols());
      m.second = Mat<S>::Zero(p.value.rows(), p.value.cols());
      it = state_.emplace(p.name, std::move(m)).first;
    }
    return it->second;
  }

  OptimizerConfig cfg_;
  std::map<std::string, Moments> state_;
  int64_t step_ = 0;
  int64_t skipped_ = 0;
};

}  // namespace tplf
