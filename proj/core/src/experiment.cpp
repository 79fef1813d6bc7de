#include "tplf/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace tplf {

namespace fs = std::filesystem;

namespace {

void check_keys(const nlohmann::json& j, const std::string& where,
                const std::vector<std::string>& allowed) {
  if (!j.is_object()) throw DataError("plan: " + where + " must be an object");
  for (const auto& [key, unused] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw DataError("plan: unknown key '" + key + "' in " + where);
}

template <class T>
T get_or(const nlohmann::json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

LoraSpec lora_spec_from_plan(const nlohmann::json& j, int layers_hint) {
  LoraSpec spec;
  check_keys(j, "train.tpl", {"rank", "alpha", "layers", "projections", "init_sigma"});
  spec.rank = get_or(j, "rank", 8);
  spec.alpha = get_or(j, "alpha", 16.0);
  spec.init_sigma = get_or(j, "init_sigma", 0.02);
  if (j.contains("projections")) {
    spec.target_projections.clear();
    for (const auto& name : j.at("projections")) {
      auto p = projection_from_name(name.get<std::string>());
      if (!p) throw DataError("plan: unknown projection '" + name.get<std::string>() + "'");
      spec.target_projections.push_back(*p);
    }
  }
  (void)layers_hint;
  return spec;
}

std::string rng_to_string(const Rng& rng) {
  std::ostringstream s;
  s << rng;
  return s.str();
}

void rng_from_string(Rng& rng, const std::string& text) {
  std::istringstream s(text);
  s >> rng;
  if (!s) throw DataError("corrupt rng state string");
}

TopicPairsConfig topic_pairs_config(const nlohmann::json& j) {
  check_keys(j, "data.synthetic.pairs",
             {"n_pairs", "n_topics", "words_per_topic", "n_fillers", "sentence_words",
              "topic_word_prob"});
  TopicPairsConfig c;
  c.n_pairs = get_or(j, "n_pairs", c.n_pairs);
  c.n_topics = get_or(j, "n_topics", c.n_topics);
  c.words_per_topic = get_or(j, "words_per_topic", c.words_per_topic);
  c.n_fillers = get_or(j, "n_fillers", c.n_fillers);
  c.sentence_words = get_or(j, "sentence_words", c.sentence_words);
  c.topic_word_prob = get_or(j, "topic_word_prob", c.topic_word_prob);
  return c;
}

BioCorpusConfig bio_corpus_config(const nlohmann::json& j) {
  check_keys(j, "data.synthetic.bio",
             {"n_sentences", "n_types", "surfaces_per_type", "n_fillers", "context_words",
              "max_entities", "max_surface_words"});
  BioCorpusConfig c;
  c.n_sentences = get_or(j, "n_sentences", c.n_sentences);
  c.n_types = get_or(j, "n_types", c.n_types);
  c.surfaces_per_type = get_or(j, "surfaces_per_type", c.surfaces_per_type);
  c.n_fillers = get_or(j, "n_fillers", c.n_fillers);
  c.context_words = get_or(j, "context_words", c.context_words);
  c.max_entities = get_or(j, "max_entities", c.max_entities);
  c.max_surface_words = get_or(j, "max_surface_words", c.max_surface_words);
  return c;
}

ConflictBenchmarkConfig conflict_config(const nlohmann::json& j) {
  check_keys(j, "data.synthetic.conflict",
             {"n_types", "n_topics", "surfaces_per_type_per_topic", "n_fillers", "context_words",
              "entities_per_sentence", "identity_fidelity", "pretrain_pairs",
              "pretrain_ner_sentences", "downstream_train_sentences", "downstream_test_sentences",
              "downstream_tc_train", "downstream_tc_test"});
  ConflictBenchmarkConfig c;
  c.n_types = get_or(j, "n_types", c.n_types);
  c.n_topics = get_or(j, "n_topics", c.n_topics);
  c.surfaces_per_type_per_topic = get_or(j, "surfaces_per_type_per_topic", c.surfaces_per_type_per_topic);
  c.n_fillers = get_or(j, "n_fillers", c.n_fillers);
  c.context_words = get_or(j, "context_words", c.context_words);
  c.entities_per_sentence = get_or(j, "entities_per_sentence", c.entities_per_sentence);
  c.identity_fidelity = get_or(j, "identity_fidelity", c.identity_fidelity);
  c.pretrain_pairs = get_or(j, "pretrain_pairs", c.pretrain_pairs);
  c.pretrain_ner_sentences = get_or(j, "pretrain_ner_sentences", c.pretrain_ner_sentences);
  c.downstream_train_sentences = get_or(j, "downstream_train_sentences", c.downstream_train_sentences);
  c.downstream_test_sentences = get_or(j, "downstream_test_sentences", c.downstream_test_sentences);
  c.downstream_tc_train = get_or(j, "downstream_tc_train", c.downstream_tc_train);
  c.downstream_tc_test = get_or(j, "downstream_tc_test", c.downstream_tc_test);
  return c;
}

struct LoadedData {
  std::vector<NerDataset> ner;
  std::vector<PairDataset> pairs;
  std::optional<NerDataset> down_ner_train, down_ner_test;
  std::optional<LabeledTextDataset> down_tc_train, down_tc_test;
};

LoadedData load_data(const ExperimentPlan& plan) {
  LoadedData data;
  for (const auto& p : plan.ner_paths) data.ner.push_back(load_conll(p));
  for (const auto& p : plan.pair_paths) data.pairs.push_back(load_pairs(p));
  if (!plan.synthetic.empty()) {
    uint64_t seed = get_or<uint64_t>(plan.synthetic, "seed", plan.seed);
    if (plan.synthetic.contains("pairs"))
      data.pairs.push_back(make_topic_pairs(topic_pairs_config(plan.synthetic.at("pairs")), seed));
    if (plan.synthetic.contains("bio"))
      data.ner.push_back(make_bio_corpus(bio_corpus_config(plan.synthetic.at("bio")), seed + 1));
    if (plan.synthetic.contains("conflict")) {
      ConflictBenchmark bench =
          make_conflict_benchmark(conflict_config(plan.synthetic.at("conflict")), seed);
      data.pairs.push_back(std::move(bench.tc_pairs));
      data.ner.push_back(std::move(bench.ner_pretrain));
      data.down_ner_train = std::move(bench.ner_train);
      data.down_ner_test = std::move(bench.ner_test);
      data.down_tc_train = std::move(bench.tc_train);
      data.down_tc_test = std::move(bench.tc_test);
    }
  }
  if (!plan.ner_down_train.empty()) data.down_ner_train = load_conll(plan.ner_down_train);
  if (!plan.ner_down_test.empty()) data.down_ner_test = load_conll(plan.ner_down_test);
  if (!plan.tc_down_train.empty()) data.down_tc_train = load_labeled_texts(plan.tc_down_train);
  if (!plan.tc_down_test.empty()) data.down_tc_test = load_labeled_texts(plan.tc_down_test);
  return data;
}

}  // namespace

ExperimentPlan ExperimentPlan::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open plan " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DataError("plan " + path + ": invalid JSON");
  return from_json(j);
}

ExperimentPlan ExperimentPlan::from_json(const nlohmann::json& j) {
  check_keys(j, "plan",
             {"name", "mode", "seed", "model", "tokenizer", "data", "pseudo", "train",
              "snapshot_every", "record_wall_time", "sweep", "downstream"});
  ExperimentPlan plan;
  plan.raw = j;
  plan.name = get_or<std::string>(j, "name", "run");
  plan.seed = get_or<uint64_t>(j, "seed", 0);

  std::string mode = get_or<std::string>(j, "mode", "MTPF-TPL");
  auto m = train_mode_from_name(mode);
  if (!m) throw DataError("plan: unknown mode '" + mode + "'");
  plan.mode = *m;

  if (j.contains("model")) {
    const auto& mj = j.at("model");
    check_keys(mj, "model",
               {"num_layers", "hidden_dim", "num_heads", "ffn_dim", "max_seq_len", "dropout_rate"});
    plan.model.num_layers = get_or(mj, "num_layers", plan.model.num_layers);
    plan.model.hidden_dim = get_or(mj, "hidden_dim", plan.model.hidden_dim);
    plan.model.num_heads = get_or(mj, "num_heads", plan.model.num_heads);
    plan.model.ffn_dim = get_or(mj, "ffn_dim", plan.model.ffn_dim);
    plan.model.max_seq_len = get_or(mj, "max_seq_len", plan.model.max_seq_len);
    plan.model.dropout_rate = get_or(mj, "dropout_rate", plan.model.dropout_rate);
  }
  plan.model.seed = plan.seed;

  if (j.contains("tokenizer")) {
    check_keys(j.at("tokenizer"), "tokenizer", {"min_count"});
    plan.tokenizer_min_count = get_or(j.at("tokenizer"), "min_count", 1);
  }

  if (j.contains("data")) {
    const auto& dj = j.at("data");
    check_keys(dj, "data", {"ner", "pairs", "synthetic"});
    if (dj.contains("ner")) plan.ner_paths = dj.at("ner").get<std::vector<std::string>>();
    if (dj.contains("pairs")) plan.pair_paths = dj.at("pairs").get<std::vector<std::string>>();
    if (dj.contains("synthetic")) {
      plan.synthetic = dj.at("synthetic");
      check_keys(plan.synthetic, "data.synthetic", {"seed", "pairs", "bio", "conflict"});
    }
  }

  if (j.contains("pseudo")) {
    plan.pseudo = j.at("pseudo");
    check_keys(plan.pseudo, "pseudo",
               {"corpus", "teacher", "k", "kmeans_batch", "kmeans_epochs", "seed"});
  }

  plan.train.mode = plan.mode;
  plan.train.seed = plan.seed;
  if (j.contains("train")) {
    const auto& tj = j.at("train");
    check_keys(tj, "train",
               {"steps", "batch_ner", "batch_tc", "learning_rate", "weight_decay", "w_ner", "w_tc",
                "pcgrad", "alternating", "temperature", "tpl"});
    plan.train.total_steps = get_or<int64_t>(tj, "steps", plan.train.total_steps);
    plan.train.batch_ner = get_or(tj, "batch_ner", plan.train.batch_ner);
    plan.train.batch_tc = get_or(tj, "batch_tc", plan.train.batch_tc);
    plan.train.optimizer.learning_rate = get_or(tj, "learning_rate", 2e-5);
    plan.train.optimizer.weight_decay = get_or(tj, "weight_decay", 0.01);
    plan.train.w_ner = get_or(tj, "w_ner", 1.0);
    plan.train.w_tc = get_or(tj, "w_tc", 1.0);
    plan.train.pcgrad = get_or(tj, "pcgrad", false);
    plan.train.alternating = get_or(tj, "alternating", false);
    plan.train.temperature = get_or(tj, "temperature", 0.05);
    if (tj.contains("tpl")) {
      plan.train.tpl_spec = lora_spec_from_plan(tj.at("tpl"), plan.model.num_layers);
      plan.train.tpl_layers = get_or(tj.at("tpl"), "layers", 2);
    }
  }

  plan.snapshot_every = get_or<int64_t>(j, "snapshot_every", 0);
  plan.record_wall_time = get_or(j, "record_wall_time", true);

  if (j.contains("sweep")) {
    check_keys(j.at("sweep"), "sweep", {"tpl_layers"});
    plan.sweep_layers = j.at("sweep").at("tpl_layers").get<std::vector<int>>();
    if (plan.sweep_layers.empty()) throw DataError("plan: sweep.tpl_layers must be non-empty");
  }

  if (j.contains("downstream")) {
    const auto& dj = j.at("downstream");
    check_keys(dj, "downstream", {"ner_train", "ner_test", "tc_train", "tc_test", "adapt"});
    plan.ner_down_train = get_or<std::string>(dj, "ner_train", "");
    plan.ner_down_test = get_or<std::string>(dj, "ner_test", "");
    plan.tc_down_train = get_or<std::string>(dj, "tc_train", "");
    plan.tc_down_test = get_or<std::string>(dj, "tc_test", "");
    if (dj.contains("adapt")) {
      plan.adapt = dj.at("adapt");
      check_keys(plan.adapt, "downstream.adapt",
                 {"warmup_epochs", "joint_epochs", "batch_size", "learning_rate", "weight_decay",
                  "rank", "alpha", "update_backbone", "probe_epochs", "probe_learning_rate"});
    }
  }

  // mode-consistency checks happen before any data is read
  plan.train.validate();
  bool has_ner_source = !plan.ner_paths.empty() || plan.synthetic.contains("bio") ||
                        plan.synthetic.contains("conflict") || !plan.pseudo.empty();
  bool has_tc_source = !plan.pair_paths.empty() || plan.synthetic.contains("pairs") ||
                       plan.synthetic.contains("conflict");
  if (plan.train.uses_ner() && !has_ner_source)
    throw DataError("plan: mode " + mode + " needs a NER data source");
  if (plan.train.uses_tc() && !has_tc_source)
    throw DataError("plan: mode " + mode + " needs a pairs data source");
  if (!plan.sweep_layers.empty()) {
    bool has_downstream = (!plan.ner_down_train.empty() && !plan.ner_down_test.empty() &&
                           !plan.tc_down_train.empty() && !plan.tc_down_test.empty()) ||
                          plan.synthetic.contains("conflict");
    if (!has_downstream) throw DataError("plan: sweep needs downstream datasets");
  }
  return plan;
}

nlohmann::json ExperimentPlan::resolved() const {
  nlohmann::json j = raw;
  j["mode"] = train_mode_name(mode);
  j["seed"] = seed;
  j["name"] = name;
  return j;
}

void save_train_state(const std::string& path, TrainState& state, AdamW<float>* opt,
                      const std::string& sampler_rng, const std::string& dropout_rng) {
  Checkpoint ckpt = encoder_checkpoint(state.encoder, state.tokenizer);
  ckpt.config["kind"] = "train_state";
  ckpt.config["step"] = state.step;
  ckpt.config["plan"] = state.plan;
  if (!sampler_rng.empty()) ckpt.config["rng"] = {{"sampler", sampler_rng}, {"dropout", dropout_rng}};
  if (state.adapters) {
    std::vector<TaskId> tasks;
    if (!state.adapters->ner.empty()) tasks.push_back(TaskId::kNer);
    if (!state.adapters->tc.empty()) tasks.push_back(TaskId::kTc);
    put_adapters(ckpt, *state.adapters, tasks);
  }
  if (state.ner_head) put_head(ckpt, *state.ner_head, state.ner_labels);
  if (opt) put_optimizer(ckpt, *opt);
  save_checkpoint(ckpt, path);
}

TrainState load_train_state(const std::string& path, AdamW<float>* opt_out,
                            std::string* sampler_rng, std::string* dropout_rng) {
  Checkpoint ckpt = load_checkpoint(path);
  TrainState state;
  state.encoder = encoder_from_checkpoint(ckpt, &state.tokenizer);
  state.step = get_or<int64_t>(ckpt.config, "step", 0);
  if (ckpt.config.contains("plan")) state.plan = ckpt.config.at("plan");
  if (ckpt.config.contains("lora_spec"))
    state.adapters = adapters_from_checkpoint(ckpt, state.encoder.config);
  if (ckpt.config.contains("head")) {
    std::vector<std::string> labels;
    state.ner_head = head_from_checkpoint(ckpt, &labels);
    state.ner_labels = std::move(labels);
  }
  if (opt_out && ckpt.config.contains("optimizer")) *opt_out = optimizer_from_checkpoint(ckpt);
  if (ckpt.config.contains("rng")) {
    if (sampler_rng) *sampler_rng = ckpt.config.at("rng").at("sampler").get<std::string>();
    if (dropout_rng) *dropout_rng = ckpt.config.at("rng").at("dropout").get<std::string>();
  }
  return state;
}

RunSummary run_experiment(const ExperimentPlan& plan, const std::string& out_dir) {
  fs::create_directories(out_dir);
  LoadedData data = load_data(plan);

  // the tokenizer sees every corpus the run touches
  std::vector<std::vector<std::string>> words;
  for (const auto& ds : data.ner) {
    auto w = corpus_words(ds);
    words.insert(words.end(), w.begin(), w.end());
  }
  for (const auto& ds : data.pairs) {
    auto w = corpus_words(ds);
    words.insert(words.end(), w.begin(), w.end());
  }
  std::vector<std::vector<std::string>> pseudo_corpus;
  if (!plan.pseudo.empty()) {
    if (plan.pseudo.contains("corpus")) {
      for (const auto& p : plan.pseudo.at("corpus")) {
        auto lines = load_text_lines(p.get<std::string>());
        pseudo_corpus.insert(pseudo_corpus.end(), lines.begin(), lines.end());
      }
    } else {
      for (const auto& ds : data.ner) {
        auto w = corpus_words(ds);
        pseudo_corpus.insert(pseudo_corpus.end(), w.begin(), w.end());
      }
    }
    words.insert(words.end(), pseudo_corpus.begin(), pseudo_corpus.end());
  }
  if (words.empty()) throw DataError("run_experiment: no corpus to build a tokenizer from");
  Tokenizer tok = Tokenizer::build(words, plan.tokenizer_min_count);

  EncoderConfig cfg = plan.model;
  cfg.vocab_size = tok.vocab_size();
  cfg.validate();

  // optional pseudo-labeling pass replaces the NER registry
  if (!plan.pseudo.empty() && plan.train.uses_ner()) {
    PseudoLabelConfig pcfg;
    pcfg.kmeans.k = get_or(plan.pseudo, "k", 16);
    pcfg.kmeans.batch_size = get_or(plan.pseudo, "kmeans_batch", 1024);
    pcfg.kmeans.epochs = get_or(plan.pseudo, "kmeans_epochs", 10);
    pcfg.seed = get_or<uint64_t>(plan.pseudo, "seed", plan.seed);
    std::string teacher_ref = get_or<std::string>(plan.pseudo, "teacher", "self");
    NerDataset pseudo;
    if (teacher_ref == "self") {
      EncoderParams<float> teacher = EncoderParams<float>::init(cfg);
      pseudo = build_pseudo_dataset(pseudo_corpus, teacher, tok, pcfg);
    } else {
      Checkpoint tc = load_checkpoint(teacher_ref);
      Tokenizer teacher_tok;
      EncoderParams<float> teacher = encoder_from_checkpoint(tc, &teacher_tok);
      pseudo = build_pseudo_dataset(pseudo_corpus, teacher, teacher_tok, pcfg);
    }
    save_conll(pseudo, (fs::path(out_dir) / "pseudo_labels.conll").string());
    data.ner.clear();
    data.ner.push_back(std::move(pseudo));
  }

  if (plan.train.uses_ner() && data.ner.empty())
    throw DataError("run_experiment: no NER dataset after setup");
  if (plan.train.uses_tc() && data.pairs.empty())
    throw DataError("run_experiment: no pairs dataset after setup");

  // label set shared across the NER registry
  std::vector<std::string> ner_labels;
  for (const auto& ds : data.ner)
    for (const auto& name : ds.label_names)
      if (std::find(ner_labels.begin(), ner_labels.end(), name) == ner_labels.end())
        ner_labels.push_back(name);

  EncoderParams<float> encoder = EncoderParams<float>::init(cfg);
  std::optional<TaskPrimaryAdapterSet<float>> adapters;
  if (plan.train.uses_adapters()) {
    LoraSpec spec = plan.train.tpl_spec;
    spec.target_layers = plan.train.tpl_layers < 0
                             ? LoraSpec::last_n_layers(cfg.num_layers, cfg.num_layers)
                             : LoraSpec::last_n_layers(cfg.num_layers, plan.train.tpl_layers);
    adapters = attach_task_primary<float>(cfg, spec, {TaskId::kNer, TaskId::kTc}, plan.seed + 17);
  }
  std::optional<LinearHead<float>> head;
  if (plan.train.uses_ner()) {
    Rng hrng(plan.seed + 29);
    head = LinearHead<float>::init("head.ner", static_cast<int>(ner_labels.size()),
                                   cfg.hidden_dim, hrng);
  }

  MtpfTrainer<float> trainer(plan.train, &encoder,
                             adapters ? &*adapters : nullptr, head ? &*head : nullptr);
  Rng sampler_rng(plan.seed ^ 0x5deece66dull);

  RunSummary summary;
  summary.out_dir = out_dir;
  MetricsLogger metrics((fs::path(out_dir) / "metrics.jsonl").string(), plan.record_wall_time);
  summary.metrics_path = metrics.path();

  {
    nlohmann::json setup;
    setup["mode"] = train_mode_name(plan.mode);
    uint64_t h = kFnvOffset;
    for (const auto& ds : data.ner) h = fnv1a(to_hex(ds.content_hash()), h);
    for (const auto& ds : data.pairs) h = fnv1a(to_hex(ds.content_hash()), h);
    setup["data_hash"] = to_hex(h);
    std::ofstream out(fs::path(out_dir) / "plan.resolved.json");
    nlohmann::json resolved = plan.resolved();
    resolved["data_hash"] = setup["data_hash"];
    out << resolved.dump(2) << "\n";
  }

  auto snapshot = [&](int64_t step) {
    TrainState state{encoder, tok, adapters, head, ner_labels, plan.resolved(), step};
    char name[64];
    std::snprintf(name, sizeof(name), "step_%08lld.tplf", static_cast<long long>(step));
    fs::path path = fs::path(out_dir) / "snapshots" / name;
    save_train_state(path.string(), state, &trainer.optimizer(), rng_to_string(sampler_rng),
                     rng_to_string(trainer.dropout_rng()));
    summary.snapshots.emplace_back(step, path.string());
  };

  if (plan.snapshot_every > 0) snapshot(0);

  const fs::path stop_file = fs::path(out_dir) / "STOP";
  for (int64_t step = 1; step <= plan.train.total_steps; ++step) {
    std::optional<TokenLabeledBatch> ner_batch;
    std::optional<ContrastiveBatch> tc_batch;
    if (plan.train.uses_ner()) {
      std::vector<std::vector<NerSentence>> registry;
      for (const auto& ds : data.ner) registry.push_back(ds.sentences);
      auto sents = hierarchical_sample(registry, plan.train.batch_ner, sampler_rng);
      SubtokenLabeling labeling = data.ner.front().scheme == TagScheme::kCluster
                                      ? SubtokenLabeling::kInheritAll
                                      : SubtokenLabeling::kFirstSubtoken;
      ner_batch = make_token_labeled_batch(sents, tok, cfg.max_seq_len, ner_labels, labeling);
    }
    if (plan.train.uses_tc()) {
      std::vector<std::vector<TextPair>> registry;
      for (const auto& ds : data.pairs) registry.push_back(ds.pairs);
      auto pairs = hierarchical_sample(registry, plan.train.batch_tc, sampler_rng);
      tc_batch = make_contrastive_batch(pairs, tok, cfg.max_seq_len);
    }

    auto res = trainer.step(ner_batch ? &*ner_batch : nullptr, tc_batch ? &*tc_batch : nullptr);
    std::map<std::string, double> record;
    if (plan.train.uses_ner()) record["loss_ner"] = res.loss_ner;
    if (plan.train.uses_tc()) record["loss_tc"] = res.loss_tc;
    if (!res.applied) {
      record["aborted"] = 1.0;
      metrics.log("diagnostic", step, record);
      continue;
    }
    metrics.log(train_mode_name(plan.mode), step, record);
    summary.final_loss_ner = res.loss_ner;
    summary.final_loss_tc = res.loss_tc;

    if (plan.snapshot_every > 0 && step % plan.snapshot_every == 0) snapshot(step);
    if (fs::exists(stop_file)) {
      summary.stopped_early = true;
      snapshot(step);
      break;
    }
  }

  TrainState final_state{encoder, tok, adapters, head, ner_labels, plan.resolved(),
                         trainer.steps_taken()};
  fs::path final_path = fs::path(out_dir) / "model_final.tplf";
  save_train_state(final_path.string(), final_state, &trainer.optimizer(),
                   rng_to_string(sampler_rng), rng_to_string(trainer.dropout_rng()));
  summary.final_checkpoint = final_path.string();
  return summary;
}

double test_f1(EncoderParams<float>& backbone, TaskPrimaryAdapterSet<float>* adapters,
               LinearHead<float>& head, const NerDataset& test, const Tokenizer& tok) {
  auto pred = predict_tags(backbone, adapters, head, test, tok);
  std::vector<std::vector<std::string>> gold;
  for (size_t i = 0; i < test.sentences.size(); ++i) {
    gold.push_back(test.sentences[i].tags);
    while (pred[i].size() < gold[i].size()) pred[i].push_back("O");
  }
  return span_f1(pred, gold).f1;
}

DownstreamScores evaluate_downstream(EncoderParams<float>& backbone, const Tokenizer& tok,
                                     const TaskPrimaryAdapterSet<float>* tpl,
                                     const NerDataset& ner_train, const NerDataset& ner_test,
                                     const LabeledTextDataset& tc_train,
                                     const LabeledTextDataset& tc_test,
                                     const AdaptNerConfig& ner_cfg, const ProbeConfig& probe_cfg) {
  DownstreamScores scores;
  if (ner_cfg.update_backbone) {
    EncoderParams<float> copy = backbone;  // keep the caller's backbone pristine
    auto res = adapt_ner(copy, tpl, ner_train, tok, ner_cfg);
    scores.ner_f1 = test_f1(copy, &res.adapters, res.head, ner_test, tok);
  } else {
    auto res = adapt_ner(backbone, tpl, ner_train, tok, ner_cfg);
    scores.ner_f1 = test_f1(backbone, &res.adapters, res.head, ner_test, tok);
  }
  TaskPrimaryAdapterSet<float>* tc_adapters = nullptr;
  TaskPrimaryAdapterSet<float> tc_copy;
  if (tpl && !tpl->tc.empty()) {
    tc_copy = *tpl;
    tc_adapters = &tc_copy;
  }
  auto probe = adapt_tc(backbone, tc_adapters, tc_train, tc_test, tok, probe_cfg);
  scores.tc_accuracy = probe.test_accuracy;
  return scores;
}

std::vector<SweepRow> run_sweep(const ExperimentPlan& plan, const std::string& out_dir) {
  if (plan.sweep_layers.empty()) throw ConfigError("run_sweep: plan has no sweep section");
  fs::create_directories(out_dir);

  AdaptNerConfig ner_cfg;
  ProbeConfig probe_cfg;
  if (!plan.adapt.empty()) {
    ner_cfg.warmup_epochs = get_or(plan.adapt, "warmup_epochs", ner_cfg.warmup_epochs);
    ner_cfg.joint_epochs = get_or(plan.adapt, "joint_epochs", ner_cfg.joint_epochs);
    ner_cfg.batch_size = get_or(plan.adapt, "batch_size", ner_cfg.batch_size);
    ner_cfg.optimizer.learning_rate = get_or(plan.adapt, "learning_rate", 2e-5);
    ner_cfg.optimizer.weight_decay = get_or(plan.adapt, "weight_decay", 0.01);
    ner_cfg.lora.rank = get_or(plan.adapt, "rank", 32);
    ner_cfg.lora.alpha = get_or(plan.adapt, "alpha", 64.0);
    ner_cfg.update_backbone = get_or(plan.adapt, "update_backbone", false);
    probe_cfg.epochs = get_or(plan.adapt, "probe_epochs", probe_cfg.epochs);
    probe_cfg.learning_rate = get_or(plan.adapt, "probe_learning_rate", probe_cfg.learning_rate);
  }
  ner_cfg.seed = plan.seed;
  probe_cfg.seed = plan.seed;

  std::vector<SweepRow> rows;
  std::ofstream jsonl(fs::path(out_dir) / "sweep_results.jsonl");
  std::ofstream csv(fs::path(out_dir) / "sweep_results.csv");
  csv << "tpl_layers,ner_f1,tc_accuracy,combined\n";
  for (int layers : plan.sweep_layers) {
    ExperimentPlan sub = plan;
    sub.sweep_layers.clear();
    sub.mode = TrainMode::kMtpfTpl;
    sub.train.mode = TrainMode::kMtpfTpl;
    sub.train.tpl_layers = layers;
    std::string label = layers < 0 ? "all" : std::to_string(layers);
    RunSummary run = run_experiment(sub, (fs::path(out_dir) / ("tpl_" + label)).string());

    AdamW<float> opt(sub.train.optimizer);
    TrainState state = load_train_state(run.final_checkpoint);
    LoadedData data = load_data(plan);
    if (!data.down_ner_train || !data.down_ner_test || !data.down_tc_train || !data.down_tc_test)
      throw DataError("run_sweep: downstream datasets unavailable");
    DownstreamScores scores = evaluate_downstream(
        state.encoder, state.tokenizer, state.adapters ? &*state.adapters : nullptr,
        *data.down_ner_train, *data.down_ner_test, *data.down_tc_train, *data.down_tc_test,
        ner_cfg, probe_cfg);

    SweepRow row{layers, scores.ner_f1, scores.tc_accuracy};
    rows.push_back(row);
    nlohmann::json rj{{"tpl_layers", layers},
                      {"ner_f1", row.ner_f1},
                      {"tc_accuracy", row.tc_accuracy},
                      {"combined", row.combined()}};
    jsonl << rj.dump() << "\n";
    jsonl.flush();
    csv << layers << "," << row.ner_f1 << "," << row.tc_accuracy << "," << row.combined() << "\n";
    csv.flush();
  }
  return rows;
}

std::vector<std::pair<int64_t, std::string>> list_snapshots(const std::string& dir) {
  std::vector<std::pair<int64_t, std::string>> out;
  if (!fs::exists(dir)) throw IoError("no snapshot directory at " + dir);
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::string name = entry.path().filename().string();
    if (name.rfind("step_", 0) != 0 || entry.path().extension() != ".tplf") continue;
    out.emplace_back(std::stoll(name.substr(5, name.size() - 5 - 5)), entry.path().string());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw IoError("no snapshots found in " + dir);
  return out;
}

SimilarityCurve perturbation_curve(const std::vector<std::pair<int64_t, std::string>>& snapshots,
                                   const NerDataset& test_set, const CurveOptions& opt) {
  EntityBank bank = EntityBank::harvest(test_set);
  auto sets = perturb_dataset(test_set, bank, opt.variants, opt.seed);
  SimilarityCurve curve;
  for (const auto& [step, path] : snapshots) {
    TrainState state = load_train_state(path);
    auto stats = perturbation_similarity(
        state.encoder, state.tokenizer, sets,
        state.adapters && !state.adapters->ner.empty() ? &*state.adapters : nullptr, TaskId::kNer);
    curve.append(step, stats.mean);
  }
  return curve;
}

SimilarityCurve homogeneity_curve(const std::vector<std::pair<int64_t, std::string>>& snapshots,
                                  const std::vector<std::vector<std::string>>& sentences,
                                  const CurveOptions& opt) {
  SimilarityCurve curve;
  for (const auto& [step, path] : snapshots) {
    TrainState state = load_train_state(path);
    auto stats = token_homogeneity(
        state.encoder, state.tokenizer, sentences, opt.homogeneity_samples,
        state.adapters && !state.adapters->tc.empty() ? &*state.adapters : nullptr, TaskId::kTc);
    curve.append(step, stats.mean);
  }
  return curve;
}

void write_curve_jsonl(const SimilarityCurve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& p : curve.points) {
    nlohmann::json j{{"step", p.step}, {"value", p.value}};
    out << j.dump() << "\n";
  }
}

void write_curve_csv(const SimilarityCurve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "step,value\n";
  for (const auto& p : curve.points) out << p.step << "," << p.value << "\n";
}

std::vector<std::vector<std::string>> load_text_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    auto words = split_whitespace(line);
    if (!words.empty()) out.push_back(std::move(words));
  }
  if (out.empty()) throw DataError(path + ": empty corpus");
  return out;
}

}  // namespace tplf
