#include "tplf/deployment.hpp"

#include <filesystem>
#include <fstream>

namespace tplf {

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kBackboneFile = "backbone.tplf";

std::string adapter_file(TaskId t) {
  return std::string("adapter_") + task_name(t) + ".tplf";
}

nlohmann::json read_manifest(const std::string& dir) {
  std::ifstream in(std::filesystem::path(dir) / kManifest);
  if (!in) throw IoError("deployment: missing manifest in " + dir);
  return nlohmann::json::parse(in);
}

uint64_t backbone_hash(EncoderParams<float>& backbone, const Tokenizer& tok) {
  return encoder_checkpoint(backbone, tok).arrays_hash();
}

}  // namespace

void export_deployment(const std::string& dir, EncoderParams<float>& backbone,
                       const Tokenizer& tok, TaskPrimaryAdapterSet<float>& adapters,
                       LinearHead<float>* ner_head, const std::vector<std::string>& ner_labels) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  Checkpoint bb = encoder_checkpoint(backbone, tok);
  save_checkpoint(bb, (fs::path(dir) / kBackboneFile).string());
  const std::string hash = to_hex(bb.arrays_hash());

  nlohmann::json manifest;
  manifest["backbone"] = {{"file", kBackboneFile}, {"hash", hash}};
  manifest["tasks"] = nlohmann::json::object();
  for (TaskId task : {TaskId::kNer, TaskId::kTc}) {
    if (adapters.group(task).empty()) continue;
    Checkpoint ad;
    ad.config["kind"] = "adapter";
    ad.config["backbone_hash"] = hash;
    put_adapters(ad, adapters, {task});
    nlohmann::json meta{{"file", adapter_file(task)}, {"spec", lora_spec_to_json(adapters.spec)}};
    if (task == TaskId::kNer && ner_head != nullptr) {
      put_head(ad, *ner_head, ner_labels);
      meta["head"] = {{"labels", ner_labels}};
    }
    save_checkpoint(ad, (fs::path(dir) / adapter_file(task)).string());
    manifest["tasks"][task_name(task)] = meta;
  }
  std::ofstream out(fs::path(dir) / kManifest);
  if (!out) throw IoError("deployment: cannot write manifest in " + dir);
  out << manifest.dump(2) << "\n";
}

TaskPrimaryAdapterSet<float> load_task_adapter(const std::string& dir, TaskId task,
                                               EncoderParams<float>& backbone,
                                               LinearHead<float>* head_out,
                                               std::vector<std::string>* labels_out) {
  namespace fs = std::filesystem;
  nlohmann::json manifest = read_manifest(dir);
  const auto& tasks = manifest.at("tasks");
  if (!tasks.contains(task_name(task)))
    throw IoError(std::string("deployment: no adapter for task ") + task_name(task));

  Checkpoint ckpt = load_checkpoint((fs::path(dir) / tasks.at(task_name(task)).at("file").get<std::string>()).string());

  // adapters bind to one backbone: compare content hashes, not file names
  Tokenizer tok = Tokenizer::from_json(read_checkpoint_config((fs::path(dir) / kBackboneFile).string()).at("tokenizer"));
  const std::string expected = ckpt.config.at("backbone_hash").get<std::string>();
  const std::string actual = to_hex(backbone_hash(backbone, tok));
  if (expected != actual)
    throw IoError("deployment: adapter was exported for backbone " + expected +
                  " but got " + actual);

  auto set = adapters_from_checkpoint(ckpt, backbone.config);
  if (head_out != nullptr && ckpt.config.contains("head"))
    *head_out = head_from_checkpoint(ckpt, labels_out);
  return set;
}

DeploymentBundle load_deployment(const std::string& dir) {
  namespace fs = std::filesystem;
  nlohmann::json manifest = read_manifest(dir);
  Checkpoint bb = load_checkpoint((fs::path(dir) / kBackboneFile).string());
  const std::string expected = manifest.at("backbone").at("hash").get<std::string>();
  if (to_hex(bb.arrays_hash()) != expected)
    throw IoError("deployment: backbone file does not match manifest hash");

  DeploymentBundle bundle;
  bundle.backbone = encoder_from_checkpoint(bb, &bundle.tokenizer);
  bundle.adapters.spec = LoraSpec{};
  for (TaskId task : {TaskId::kNer, TaskId::kTc}) {
    if (!manifest.at("tasks").contains(task_name(task))) continue;
    LinearHead<float> head;
    std::vector<std::string> labels;
    auto set = load_task_adapter(dir, task, bundle.backbone,
                                 task == TaskId::kNer ? &head : nullptr,
                                 task == TaskId::kNer ? &labels : nullptr);
    bundle.adapters.spec = set.spec;
    for (auto& [key, mod] : set.group(task))
      bundle.adapters.group(task).emplace(key, std::move(mod));
    if (task == TaskId::kNer && !labels.empty()) {
      bundle.ner_head = std::move(head);
      bundle.ner_labels = std::move(labels);
    }
  }
  return bundle;
}

}  // namespace tplf
