#pragma once

#include <string>
#include <vector>

#include "tplf/checkpoint.hpp"
#include "tplf/encoder.hpp"
#include "tplf/objectives.hpp"
#include "tplf/optimizer.hpp"
#include "tplf/tokenizer.hpp"

namespace tplf {

inline nlohmann::json encoder_config_to_json(const EncoderConfig& c) {
  return {{"num_layers", c.num_layers}, {"hidden_dim", c.hidden_dim},
          {"num_heads", c.num_heads},   {"ffn_dim", c.ffn_dim},
          {"vocab_size", c.vocab_size}, {"max_seq_len", c.max_seq_len},
          {"dropout_rate", c.dropout_rate}, {"seed", c.seed}};
}

inline EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.num_layers = j.at("num_layers").get<int>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.num_heads = j.at("num_heads").get<int>();
  c.ffn_dim = j.at("ffn_dim").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.max_seq_len = j.at("max_seq_len").get<int>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.seed = j.at("seed").get<uint64_t>();
  c.validate();
  return c;
}

inline nlohmann::json lora_spec_to_json(const LoraSpec& s) {
  std::vector<std::string> projs;
  for (Projection p : s.target_projections) projs.emplace_back(projection_name(p));
  return {{"rank", s.rank},
          {"alpha", s.alpha},
          {"target_projections", projs},
          {"target_layers", s.target_layers},
          {"init_sigma", s.init_sigma}};
}

inline LoraSpec lora_spec_from_json(const nlohmann::json& j) {
  LoraSpec s;
  s.rank = j.at("rank").get<int>();
  s.alpha = j.at("alpha").get<double>();
  s.target_projections.clear();
  for (const auto& name : j.at("target_projections")) {
    auto p = projection_from_name(name.get<std::string>());
    if (!p) throw DataError("unknown projection '" + name.get<std::string>() + "'");
    s.target_projections.push_back(*p);
  }
  s.target_layers = j.at("target_layers").get<std::vector<int>>();
  s.init_sigma = j.at("init_sigma").get<double>();
  return s;
}

inline void put_parameters(Checkpoint& ckpt, const std::vector<Parameter<float>*>& params) {
  for (const Parameter<float>* p : params) {
    if (!ckpt.arrays.emplace(p->name, p->value).second)
      throw ConfigError("checkpoint: duplicate parameter name " + p->name);
  }
}

inline void get_parameters(const Checkpoint& ckpt, const std::vector<Parameter<float>*>& params) {
  for (Parameter<float>* p : params) {
    auto it = ckpt.arrays.find(p->name);
    if (it == ckpt.arrays.end()) throw IoError("checkpoint: missing array " + p->name);
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols())
      throw IoError("checkpoint: shape mismatch for " + p->name);
    p->value = it->second;
  }
}

inline Checkpoint encoder_checkpoint(EncoderParams<float>& params, const Tokenizer& tok) {
  Checkpoint ckpt;
  ckpt.config["kind"] = "encoder";
  ckpt.config["encoder"] = encoder_config_to_json(params.config);
  ckpt.config["tokenizer"] = tok.to_json();
  put_parameters(ckpt, params.parameters());
  return ckpt;
}

inline EncoderParams<float> encoder_from_checkpoint(const Checkpoint& ckpt, Tokenizer* tok_out) {
  EncoderConfig cfg = encoder_config_from_json(ckpt.config.at("encoder"));
  EncoderParams<float> params = EncoderParams<float>::init(cfg);
  get_parameters(ckpt, params.parameters());
  if (tok_out) *tok_out = Tokenizer::from_json(ckpt.config.at("tokenizer"));
  return params;
}

inline void put_adapters(Checkpoint& ckpt, TaskPrimaryAdapterSet<float>& set,
                         const std::vector<TaskId>& tasks) {
  ckpt.config["lora_spec"] = lora_spec_to_json(set.spec);
  std::vector<std::string> names;
  for (TaskId t : tasks) {
    names.emplace_back(task_name(t));
    put_parameters(ckpt, set.parameters(t));
  }
  ckpt.config["tasks"] = names;
}

inline TaskPrimaryAdapterSet<float> adapters_from_checkpoint(const Checkpoint& ckpt,
                                                             const EncoderConfig& cfg) {
  LoraSpec spec = lora_spec_from_json(ckpt.config.at("lora_spec"));
  std::vector<TaskId> tasks;
  for (const auto& name : ckpt.config.at("tasks"))
    tasks.push_back(name.get<std::string>() == "ner" ? TaskId::kNer : TaskId::kTc);
  auto set = attach_task_primary<float>(cfg, spec, tasks, /*seed=*/0);
  for (TaskId t : tasks) get_parameters(ckpt, set.parameters(t));
  return set;
}

inline void put_head(Checkpoint& ckpt, LinearHead<float>& head,
                     const std::vector<std::string>& label_names) {
  put_parameters(ckpt, head.parameters());
  ckpt.config["head"] = {{"weight", head.weight.name}, {"bias", head.bias.name},
                         {"labels", label_names}};
}

inline LinearHead<float> head_from_checkpoint(const Checkpoint& ckpt,
                                              std::vector<std::string>* label_names) {
  const auto& meta = ckpt.config.at("head");
  LinearHead<float> head;
  head.weight.name = meta.at("weight").get<std::string>();
  head.bias.name = meta.at("bias").get<std::string>();
  auto wit = ckpt.arrays.find(head.weight.name);
  auto bit = ckpt.arrays.find(head.bias.name);
  if (wit == ckpt.arrays.end() || bit == ckpt.arrays.end())
    throw IoError("checkpoint: missing head arrays");
  head.weight.value = wit->second;
  head.bias.value = bit->second;
  if (label_names) *label_names = meta.at("labels").get<std::vector<std::string>>();
  return head;
}

inline void put_optimizer(Checkpoint& ckpt, const AdamW<float>& opt) {
  ckpt.config["optimizer"] = {{"step", opt.step_count()},
                              {"learning_rate", opt.config().learning_rate},
                              {"weight_decay", opt.config().weight_decay},
                              {"beta1", opt.config().beta1},
                              {"beta2", opt.config().beta2},
                              {"epsilon", opt.config().epsilon}};
  for (const auto& [name, m] : opt.state()) {
    ckpt.arrays.emplace("opt.m." + name, m.first);
    ckpt.arrays.emplace("opt.v." + name, m.second);
  }
}

inline AdamW<float> optimizer_from_checkpoint(const Checkpoint& ckpt) {
  const auto& j = ckpt.config.at("optimizer");
  OptimizerConfig cfg;
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.weight_decay = j.at("weight_decay").get<double>();
  cfg.beta1 = j.at("beta1").get<double>();
  cfg.beta2 = j.at("beta2").get<double>();
  cfg.epsilon = j.at("epsilon").get<double>();
  AdamW<float> opt(cfg);
  opt.set_step_count(j.at("step").get<int64_t>());
  for (const auto& [name, m] : ckpt.arrays) {
    if (name.rfind("opt.m.", 0) == 0) {
      auto& mom = opt.state()[name.substr(6)];
      mom.first = m;
    } else if (name.rfind("opt.v.", 0) == 0) {
      auto& mom = opt.state()[name.substr(6)];
      mom.second = m;
    }
  }
  return opt;
}

}  // namespace tplf
