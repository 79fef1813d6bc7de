#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tplf/adaptation.hpp"
#include "tplf/deployment.hpp"
#include "tplf/metrics_log.hpp"
#include "tplf/perturb.hpp"
#include "tplf/pseudo_labels.hpp"
#include "tplf/synthetic.hpp"
#include "tplf/trainer.hpp"

namespace tplf {

// A validated experiment plan. Parsing performs the full schema check, so a
// malformed plan fails before any data is touched.
struct ExperimentPlan {
  std::string name = "run";
  TrainMode mode = TrainMode::kMtpfTpl;
  uint64_t seed = 0;
  EncoderConfig model;  // vocab_size is resolved from the tokenizer
  int tokenizer_min_count = 1;

  std::vector<std::string> ner_paths;
  std::vector<std::string> pair_paths;
  nlohmann::json synthetic;  // optional in-process corpora
  nlohmann::json pseudo;     // optional pseudo-label pipeline settings

  TrainPlan train;
  int64_t snapshot_every = 0;  // 0 = only final
  bool record_wall_time = true;

  std::vector<int> sweep_layers;  // non-empty selects sweep mode
  std::string ner_down_train, ner_down_test, tc_down_train, tc_down_test;
  nlohmann::json adapt;  // downstream adaptation overrides

  nlohmann::json raw;

  static ExperimentPlan from_json(const nlohmann::json& j);
  static ExperimentPlan from_file(const std::string& path);
  nlohmann::json resolved() const;
};

struct RunSummary {
  std::string out_dir;
  std::string metrics_path;
  std::string final_checkpoint;
  std::vector<std::pair<int64_t, std::string>> snapshots;
  double final_loss_ner = 0.0;
  double final_loss_tc = 0.0;
  bool stopped_early = false;
};

// Mutable training state bundled for checkpointing.
struct TrainState {
  EncoderParams<float> encoder;
  Tokenizer tokenizer;
  std::optional<TaskPrimaryAdapterSet<float>> adapters;
  std::optional<LinearHead<float>> ner_head;
  std::vector<std::string> ner_labels;
  nlohmann::json plan;
  int64_t step = 0;
};

void save_train_state(const std::string& path, TrainState& state, AdamW<float>* opt,
                      const std::string& sampler_rng, const std::string& dropout_rng);
TrainState load_train_state(const std::string& path, AdamW<float>* opt_out = nullptr,
                            std::string* sampler_rng = nullptr, std::string* dropout_rng = nullptr);

RunSummary run_experiment(const ExperimentPlan& plan, const std::string& out_dir);

struct SweepRow {
  int tpl_layers = 0;
  double ner_f1 = 0.0;
  double tc_accuracy = 0.0;

  double combined() const { return 0.5 * (ner_f1 + tc_accuracy); }
};

std::vector<SweepRow> run_sweep(const ExperimentPlan& plan, const std::string& out_dir);

struct DownstreamScores {
  double ner_f1 = 0.0;
  double tc_accuracy = 0.0;

  double combined() const { return 0.5 * (ner_f1 + tc_accuracy); }
};

DownstreamScores evaluate_downstream(EncoderParams<float>& backbone, const Tokenizer& tok,
                                     const TaskPrimaryAdapterSet<float>* tpl,
                                     const NerDataset& ner_train, const NerDataset& ner_test,
                                     const LabeledTextDataset& tc_train,
                                     const LabeledTextDataset& tc_test,
                                     const AdaptNerConfig& ner_cfg, const ProbeConfig& probe_cfg);

// Scores word-level predictions against gold, padding truncated predictions
// with O so lengths always align.
double test_f1(EncoderParams<float>& backbone, TaskPrimaryAdapterSet<float>* adapters,
               LinearHead<float>& head, const NerDataset& test, const Tokenizer& tok);

// --- analysis over snapshot directories ---

std::vector<std::pair<int64_t, std::string>> list_snapshots(const std::string& dir);

struct CurveOptions {
  int variants = 4;
  size_t homogeneity_samples = 2000;
  uint64_t seed = 0;
};

SimilarityCurve perturbation_curve(const std::vector<std::pair<int64_t, std::string>>& snapshots,
                                   const NerDataset& test_set, const CurveOptions& opt);
SimilarityCurve homogeneity_curve(const std::vector<std::pair<int64_t, std::string>>& snapshots,
                                  const std::vector<std::vector<std::string>>& sentences,
                                  const CurveOptions& opt);

void write_curve_jsonl(const SimilarityCurve& curve, const std::string& path);
void write_curve_csv(const SimilarityCurve& curve, const std::string& path);

// Raw text corpus: one whitespace-tokenized sentence per line.
std::vector<std::vector<std::string>> load_text_lines(const std::string& path);

}  // namespace tplf
