#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "tplf/experiment.hpp"

using namespace tplf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& leaf) {
  fs::path dir = fs::temp_directory_path() / "tplf_experiment_test" / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

nlohmann::json tiny_plan(const std::string& mode, uint64_t seed) {
  nlohmann::json j = {
      {"name", "tiny"},
      {"mode", mode},
      {"seed", seed},
      {"model", {{"num_layers", 1}, {"hidden_dim", 16}, {"num_heads", 4}, {"ffn_dim", 32},
                 {"max_seq_len", 20}, {"dropout_rate", 0.1}}},
      {"data", {{"synthetic", {{"seed", 3}, {"conflict", nlohmann::json::object()}}}}},
      {"train", {{"steps", 6}, {"batch_ner", 4}, {"batch_tc", 4}, {"learning_rate", 1e-3}}},
      {"record_wall_time", false}};
  if (mode == "MTPF-TPL" || mode == "PF-L")
    j["train"]["tpl"] = {{"rank", 2}, {"alpha", 4.0}, {"layers", 1}};
  return j;
}

size_t count_lines_with(const std::string& path, const std::string& needle) {
  std::ifstream in(path);
  std::string line;
  size_t n = 0;
  while (std::getline(in, line))
    if (line.find(needle) != std::string::npos) ++n;
  return n;
}

}  // namespace

TEST_CASE("schema violations fail before any compute") {
  auto bad_key = tiny_plan("MTPF-TPL", 1);
  bad_key["surprise"] = 1;
  CHECK_THROWS_WITH_AS((void)ExperimentPlan::from_json(bad_key), doctest::Contains("surprise"),
                       DataError);

  auto bad_mode = tiny_plan("MTPF-TPL", 1);
  bad_mode["mode"] = "NOT-A-MODE";
  CHECK_THROWS_AS((void)ExperimentPlan::from_json(bad_mode), DataError);

  auto no_data = tiny_plan("MTPF", 1);
  no_data.erase("data");
  CHECK_THROWS_AS((void)ExperimentPlan::from_json(no_data), DataError);

  auto bad_nested = tiny_plan("MTPF-TPL", 1);
  bad_nested["train"]["tpl"]["oops"] = 1;
  CHECK_THROWS_AS((void)ExperimentPlan::from_json(bad_nested), DataError);

  auto sweep_no_downstream = tiny_plan("MTPF-TPL", 1);
  sweep_no_downstream["sweep"] = {{"tpl_layers", {1, 2}}};
  sweep_no_downstream["data"] = {{"pairs", {"x.jsonl"}}, {"ner", {"y.conll"}}};
  CHECK_THROWS_AS((void)ExperimentPlan::from_json(sweep_no_downstream), DataError);
}

TEST_CASE("PF-TC runs emit no NER loss records") {
  ExperimentPlan plan = ExperimentPlan::from_json(tiny_plan("PF-TC", 2));
  auto dir = scratch("pftc");
  RunSummary summary = run_experiment(plan, dir.string());
  CHECK(count_lines_with(summary.metrics_path, "loss_tc") == 6);
  CHECK(count_lines_with(summary.metrics_path, "loss_ner") == 0);
  CHECK(fs::exists(summary.final_checkpoint));
}

TEST_CASE("same plan and seed reproduce the metrics file hash") {
  ExperimentPlan plan = ExperimentPlan::from_json(tiny_plan("MTPF-TPL", 5));
  auto a = run_experiment(plan, scratch("det_a").string());
  auto b = run_experiment(plan, scratch("det_b").string());
  CHECK(file_hash(a.metrics_path) == file_hash(b.metrics_path));

  ExperimentPlan other = ExperimentPlan::from_json(tiny_plan("MTPF-TPL", 6));
  auto c = run_experiment(other, scratch("det_c").string());
  CHECK(file_hash(a.metrics_path) != file_hash(c.metrics_path));
}

TEST_CASE("snapshots appear at the requested cadence and load back") {
  auto j = tiny_plan("MTPF-TPL", 7);
  j["snapshot_every"] = 3;
  ExperimentPlan plan = ExperimentPlan::from_json(j);
  auto dir = scratch("snap");
  RunSummary summary = run_experiment(plan, dir.string());
  auto snapshots = list_snapshots((dir / "snapshots").string());
  REQUIRE(snapshots.size() == 3);  // steps 0, 3, 6
  CHECK(snapshots[0].first == 0);
  CHECK(snapshots[2].first == 6);
  TrainState state = load_train_state(snapshots[2].second);
  CHECK(state.step == 6);
  CHECK(state.adapters.has_value());
  CHECK(state.ner_head.has_value());
}

TEST_CASE("train state round trips through a checkpoint") {
  ExperimentPlan plan = ExperimentPlan::from_json(tiny_plan("MTPF-TPL", 9));
  auto dir = scratch("state");
  RunSummary summary = run_experiment(plan, dir.string());
  AdamW<float> opt{OptimizerConfig{}};
  std::string sampler, dropout;
  TrainState state = load_train_state(summary.final_checkpoint, &opt, &sampler, &dropout);
  CHECK(state.step == 6);
  CHECK(opt.step_count() == 6);
  CHECK(!sampler.empty());
  CHECK(!dropout.empty());

  auto path2 = (dir / "resaved.tplf").string();
  save_train_state(path2, state, &opt, sampler, dropout);
  TrainState again = load_train_state(path2);
  CHECK(again.encoder.token_embeddings.value == state.encoder.token_embeddings.value);
}

TEST_CASE("stop file checkpoints and exits early") {
  auto j = tiny_plan("MTPF-TPL", 11);
  j["train"]["steps"] = 50;
  ExperimentPlan plan = ExperimentPlan::from_json(j);
  auto dir = scratch("stop");
  std::ofstream(dir / "STOP") << "";
  RunSummary summary = run_experiment(plan, dir.string());
  CHECK(summary.stopped_early);
  CHECK(summary.snapshots.size() == 1);  // the shutdown snapshot
  CHECK(summary.snapshots[0].first == 1);
}

TEST_CASE("sweep produces one scored row per layer setting") {
  auto j = tiny_plan("MTPF-TPL", 13);
  j["sweep"] = {{"tpl_layers", {1, -1}}};
  j["downstream"] = {{"adapt", {{"warmup_epochs", 1}, {"joint_epochs", 1}, {"batch_size", 8},
                                {"learning_rate", 1e-3}, {"probe_epochs", 50}, {"rank", 4},
                                {"alpha", 8.0}}}};
  ExperimentPlan plan = ExperimentPlan::from_json(j);
  auto dir = scratch("sweep");
  auto rows = run_sweep(plan, dir.string());
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK(r.ner_f1 >= 0.0);
    CHECK(r.ner_f1 <= 1.0);
    CHECK(r.tc_accuracy >= 0.0);
    CHECK(r.tc_accuracy <= 1.0);
  }
  CHECK(fs::exists(dir / "sweep_results.csv"));
  CHECK(fs::exists(dir / "sweep_results.jsonl"));
  CHECK(count_lines_with((dir / "sweep_results.jsonl").string(), "tpl_layers") == 2);
}

TEST_CASE("pseudo-label pipeline feeds PF-NER end to end") {
  auto j = tiny_plan("PF-NER", 15);
  j["pseudo"] = {{"teacher", "self"}, {"k", 4}, {"kmeans_batch", 64}, {"kmeans_epochs", 2}};
  ExperimentPlan plan = ExperimentPlan::from_json(j);
  auto dir = scratch("pseudo");
  RunSummary summary = run_experiment(plan, dir.string());
  CHECK(fs::exists(dir / "pseudo_labels.conll"));
  NerDataset pseudo = load_conll((dir / "pseudo_labels.conll").string());
  CHECK(pseudo.scheme == TagScheme::kCluster);
  CHECK(count_lines_with(summary.metrics_path, "loss_ner") == 6);
}

TEST_CASE("metrics files are valid JSONL at every prefix") {
  ExperimentPlan plan = ExperimentPlan::from_json(tiny_plan("MTPF-TPL", 17));
  auto dir = scratch("jsonl");
  RunSummary summary = run_experiment(plan, dir.string());
  std::ifstream in(summary.metrics_path);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    auto parsed = nlohmann::json::parse(line, nullptr, false);
    CHECK_FALSE(parsed.is_discarded());
    CHECK(parsed.contains("step"));
    CHECK(parsed.contains("wall_time"));
    CHECK(parsed.contains("phase"));
    ++n;
  }
  CHECK(n == 6);
}
