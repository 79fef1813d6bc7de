// tplf: pre-finetuning workbench CLI.
//
// Subcommands: pretrain-ner, pretrain-tc, mtpf, adapt-ner, adapt-tc,
// analyze, sweep, export, gen-data. Flag precedence: CLI > plan file >
// built-in defaults. TPLF_DATA_DIR prefixes relative dataset paths.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "tplf/experiment.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config;
  std::string out = "runs/out";
  uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;
  std::string precision = "f32";
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "plan file (JSON)");
  cmd->add_option("--out", args.out, "output directory");
  cmd->add_option_function<uint64_t>(
      "--seed", [&args](uint64_t s) { args.seed = s; args.seed_set = true; }, "seed override");
  cmd->add_option("--threads", args.threads, "worker threads (compute is single-threaded)");
  cmd->add_option("--precision", args.precision, "f32 | f64-test")
      ->check(CLI::IsMember({"f32", "f64-test"}));
}

std::string resolve_data_path(const std::string& path) {
  const char* root = std::getenv("TPLF_DATA_DIR");
  if (root == nullptr || path.empty() || fs::path(path).is_absolute()) return path;
  if (fs::exists(path)) return path;
  return (fs::path(root) / path).string();
}

nlohmann::json load_plan_json(const CommonArgs& args, const char* default_mode) {
  nlohmann::json j;
  if (!args.config.empty()) {
    std::ifstream in(resolve_data_path(args.config));
    if (!in) throw tplf::IoError("cannot open plan " + args.config);
    j = nlohmann::json::parse(in);
  }
  if (!j.contains("mode") && default_mode != nullptr) j["mode"] = default_mode;
  if (args.seed_set) j["seed"] = args.seed;
  return j;
}

void resolve_plan_paths(nlohmann::json& j) {
  auto fix_list = [](nlohmann::json& node) {
    for (auto& p : node) p = resolve_data_path(p.get<std::string>());
  };
  if (j.contains("data")) {
    if (j["data"].contains("ner")) fix_list(j["data"]["ner"]);
    if (j["data"].contains("pairs")) fix_list(j["data"]["pairs"]);
  }
  if (j.contains("pseudo") && j["pseudo"].contains("corpus")) fix_list(j["pseudo"]["corpus"]);
  if (j.contains("downstream"))
    for (const char* key : {"ner_train", "ner_test", "tc_train", "tc_test"})
      if (j["downstream"].contains(key))
        j["downstream"][key] = resolve_data_path(j["downstream"][key].get<std::string>());
}

int run_train(const CommonArgs& args, const char* mode) {
  nlohmann::json j = load_plan_json(args, mode);
  resolve_plan_paths(j);
  if (args.precision == "f64-test")
    std::cerr << "note: --precision f64-test applies to gradient checks; training runs in f32\n";
  tplf::ExperimentPlan plan = tplf::ExperimentPlan::from_json(j);
  tplf::RunSummary summary = tplf::run_experiment(plan, args.out);
  std::cout << "run complete: " << summary.out_dir << "\n"
            << "  metrics:    " << summary.metrics_path << "\n"
            << "  checkpoint: " << summary.final_checkpoint << "\n";
  if (plan.train.uses_ner()) std::cout << "  final loss_ner: " << summary.final_loss_ner << "\n";
  if (plan.train.uses_tc()) std::cout << "  final loss_tc:  " << summary.final_loss_tc << "\n";
  if (summary.stopped_early) std::cout << "  stopped early via STOP file\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"task-primary LoRA pre-finetuning workbench"};
  app.require_subcommand(1);

  CommonArgs args;

  auto* pretrain_ner = app.add_subcommand("pretrain-ner", "individual NER pre-finetuning (PF-NER)");
  add_common(pretrain_ner, args);
  auto* pretrain_tc = app.add_subcommand("pretrain-tc", "individual contrastive pre-finetuning (PF-TC)");
  add_common(pretrain_tc, args);
  auto* mtpf = app.add_subcommand("mtpf", "multi-task pre-finetuning (MTPF / MTPF-TPL / PF-L per plan)");
  add_common(mtpf, args);

  auto* adapt_ner_cmd = app.add_subcommand("adapt-ner", "downstream NER adaptation of a checkpoint");
  add_common(adapt_ner_cmd, args);
  std::string model_path, train_path, test_path;
  bool use_tpl = true;
  adapt_ner_cmd->add_option("--model", model_path, "train-state checkpoint (.tplf)")->required();
  adapt_ner_cmd->add_option("--train", train_path, "BIO training data")->required();
  adapt_ner_cmd->add_option("--test", test_path, "BIO test data");
  adapt_ner_cmd->add_flag("--use-tpl,!--no-tpl", use_tpl, "initialize LoRA from the TPL group");

  auto* adapt_tc_cmd = app.add_subcommand("adapt-tc", "linear probe on frozen embeddings");
  add_common(adapt_tc_cmd, args);
  adapt_tc_cmd->add_option("--model", model_path, "train-state checkpoint (.tplf)")->required();
  adapt_tc_cmd->add_option("--train", train_path, "labeled texts (JSONL/TSV)")->required();
  adapt_tc_cmd->add_option("--test", test_path, "labeled texts (JSONL/TSV)")->required();

  auto* analyze = app.add_subcommand("analyze", "similarity diagnostics over snapshots");
  add_common(analyze, args);
  std::string snapshots_dir, analyze_mode = "perturb-sim", analyze_data;
  int variants = 4;
  analyze->add_option("--snapshots", snapshots_dir, "snapshot directory of a run")->required();
  analyze->add_option("--kind", analyze_mode, "perturb-sim | homogeneity")
      ->check(CLI::IsMember({"perturb-sim", "homogeneity"}));
  analyze->add_option("--data", analyze_data, "BIO data (perturb-sim) or text lines (homogeneity)")
      ->required();
  analyze->add_option("--variants", variants, "perturbed variants per sentence");

  auto* sweep = app.add_subcommand("sweep", "TPL layer-placement sweep with downstream scores");
  add_common(sweep, args);

  auto* export_cmd = app.add_subcommand("export", "write a deployment bundle from a checkpoint");
  add_common(export_cmd, args);
  export_cmd->add_option("--model", model_path, "train-state checkpoint (.tplf)")->required();

  auto* gen = app.add_subcommand("gen-data", "generate synthetic corpora");
  add_common(gen, args);
  std::string gen_kind = "pairs";
  int gen_count = 1000;
  gen->add_option("--kind", gen_kind, "pairs | bio | conflict")
      ->check(CLI::IsMember({"pairs", "bio", "conflict"}));
  gen->add_option("--count", gen_count, "pairs or sentences to generate");

  CLI11_PARSE(app, argc, argv);

  try {
    if (pretrain_ner->parsed()) return run_train(args, "PF-NER");
    if (pretrain_tc->parsed()) return run_train(args, "PF-TC");
    if (mtpf->parsed()) return run_train(args, nullptr);
    if (sweep->parsed()) {
      nlohmann::json j = load_plan_json(args, "MTPF-TPL");
      resolve_plan_paths(j);
      tplf::ExperimentPlan plan = tplf::ExperimentPlan::from_json(j);
      if (plan.sweep_layers.empty()) throw tplf::DataError("sweep: plan needs a sweep section");
      auto rows = tplf::run_sweep(plan, args.out);
      std::cout << "tpl_layers  ner_f1  tc_accuracy  combined\n";
      for (const auto& r : rows)
        std::cout << (r.tpl_layers < 0 ? std::string("all") : std::to_string(r.tpl_layers)) << "  "
                  << r.ner_f1 << "  " << r.tc_accuracy << "  " << r.combined() << "\n";
      return 0;
    }
    if (adapt_ner_cmd->parsed()) {
      tplf::TrainState state = tplf::load_train_state(resolve_data_path(model_path));
      tplf::NerDataset train = tplf::load_conll(resolve_data_path(train_path));
      tplf::AdaptNerConfig cfg;
      cfg.seed = args.seed;
      auto res = tplf::adapt_ner(state.encoder,
                                 use_tpl && state.adapters ? &*state.adapters : nullptr, train,
                                 state.tokenizer, cfg);
      std::cout << "stage-1 train F1: " << res.stage1_train_f1 << "\n"
                << "stage-2 train F1: " << res.stage2_train_f1 << "\n";
      if (!test_path.empty()) {
        tplf::NerDataset test = tplf::load_conll(resolve_data_path(test_path));
        std::cout << "test F1: "
                  << tplf::test_f1(state.encoder, &res.adapters, res.head, test, state.tokenizer)
                  << "\n";
      }
      fs::create_directories(args.out);
      tplf::export_deployment(args.out, state.encoder, state.tokenizer, res.adapters, &res.head,
                              train.label_names);
      std::cout << "adapted bundle written to " << args.out << "\n";
      return 0;
    }
    if (adapt_tc_cmd->parsed()) {
      tplf::TrainState state = tplf::load_train_state(resolve_data_path(model_path));
      tplf::LabeledTextDataset train = tplf::load_labeled_texts(resolve_data_path(train_path));
      tplf::LabeledTextDataset test = tplf::load_labeled_texts(resolve_data_path(test_path));
      tplf::ProbeConfig cfg;
      cfg.seed = args.seed;
      auto res = tplf::adapt_tc(state.encoder, state.adapters ? &*state.adapters : nullptr, train,
                                test, state.tokenizer, cfg);
      std::cout << "probe train accuracy: " << res.train_accuracy << "\n"
                << "probe test accuracy:  " << res.test_accuracy << "\n";
      if (res.degenerate) std::cout << "warning: degenerate single-class probe\n";
      return 0;
    }
    if (analyze->parsed()) {
      auto snapshots = tplf::list_snapshots(resolve_data_path(snapshots_dir));
      tplf::CurveOptions opt;
      opt.seed = args.seed;
      opt.variants = variants;
      tplf::SimilarityCurve curve;
      if (analyze_mode == "perturb-sim") {
        tplf::NerDataset data = tplf::load_conll(resolve_data_path(analyze_data));
        curve = tplf::perturbation_curve(snapshots, data, opt);
      } else {
        auto sentences = tplf::load_text_lines(resolve_data_path(analyze_data));
        curve = tplf::homogeneity_curve(snapshots, sentences, opt);
      }
      fs::create_directories(args.out);
      tplf::write_curve_jsonl(curve, (fs::path(args.out) / (analyze_mode + ".jsonl")).string());
      tplf::write_curve_csv(curve, (fs::path(args.out) / (analyze_mode + ".csv")).string());
      for (const auto& p : curve.points)
        std::cout << "step " << p.step << ": " << p.value << "\n";
      return 0;
    }
    if (export_cmd->parsed()) {
      tplf::TrainState state = tplf::load_train_state(resolve_data_path(model_path));
      if (!state.adapters) throw tplf::DataError("export: checkpoint carries no adapters");
      tplf::export_deployment(args.out, state.encoder, state.tokenizer, *state.adapters,
                              state.ner_head ? &*state.ner_head : nullptr, state.ner_labels);
      std::cout << "deployment bundle written to " << args.out << "\n";
      return 0;
    }
    if (gen->parsed()) {
      fs::create_directories(args.out);
      if (gen_kind == "pairs") {
        tplf::TopicPairsConfig cfg;
        cfg.n_pairs = gen_count;
        tplf::save_pairs_jsonl(tplf::make_topic_pairs(cfg, args.seed),
                               (fs::path(args.out) / "pairs.jsonl").string());
      } else if (gen_kind == "bio") {
        tplf::BioCorpusConfig cfg;
        cfg.n_sentences = gen_count;
        tplf::save_conll(tplf::make_bio_corpus(cfg, args.seed),
                         (fs::path(args.out) / "ner.conll").string());
      } else {
        tplf::ConflictBenchmarkConfig cfg;
        auto bench = tplf::make_conflict_benchmark(cfg, args.seed);
        tplf::save_pairs_jsonl(bench.tc_pairs, (fs::path(args.out) / "pairs.jsonl").string());
        tplf::save_conll(bench.ner_pretrain, (fs::path(args.out) / "ner_pretrain.conll").string());
        tplf::save_conll(bench.ner_train, (fs::path(args.out) / "ner_train.conll").string());
        tplf::save_conll(bench.ner_test, (fs::path(args.out) / "ner_test.conll").string());
        tplf::save_labeled_texts_jsonl(bench.tc_train, (fs::path(args.out) / "tc_train.jsonl").string());
        tplf::save_labeled_texts_jsonl(bench.tc_test, (fs::path(args.out) / "tc_test.jsonl").string());
      }
      std::cout << "data written to " << args.out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
