#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tplf/model_io.hpp"

namespace tplf {

// Fig-1 style deployment layout: one backbone checkpoint plus per-task
// adapter files and a manifest binding adapters to the backbone's content
// hash. Adapters refuse to load against a different backbone.
struct DeploymentBundle {
  EncoderParams<float> backbone;
  Tokenizer tokenizer;
  TaskPrimaryAdapterSet<float> adapters;
  std::optional<LinearHead<float>> ner_head;
  std::vector<std::string> ner_labels;
};

void export_deployment(const std::string& dir, EncoderParams<float>& backbone,
                       const Tokenizer& tok, TaskPrimaryAdapterSet<float>& adapters,
                       LinearHead<float>* ner_head = nullptr,
                       const std::vector<std::string>& ner_labels = {});

DeploymentBundle load_deployment(const std::string& dir);

// Loads one task's adapter file, verifying the manifest's backbone hash
// against the backbone actually supplied.
TaskPrimaryAdapterSet<float> load_task_adapter(const std::string& dir, TaskId task,
                                               EncoderParams<float>& backbone,
                                               LinearHead<float>* head_out = nullptr,
                                               std::vector<std::string>* labels_out = nullptr);

}  // namespace tplf
