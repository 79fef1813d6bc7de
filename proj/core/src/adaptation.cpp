#include "tplf/adaptation.hpp"

#include <set>

namespace tplf {

ProbeResult fit_linear_probe(const Mat<float>& x_train, const std::vector<int>& y_train,
                             const Mat<float>& x_test, const std::vector<int>& y_test,
                             int num_classes, const ProbeConfig& cfg) {
  if (x_train.rows() == 0) throw DataError("fit_linear_probe: empty training set");
  if (static_cast<size_t>(x_train.rows()) != y_train.size())
    throw ConfigError("fit_linear_probe: features/labels disagree");
  if (num_classes < 2) throw ConfigError("fit_linear_probe: needs at least 2 classes");

  ProbeResult res;
  std::set<int> seen(y_train.begin(), y_train.end());
  if (seen.size() < 2) {
    warn("fit_linear_probe: single-class training set, probe is degenerate");
    res.degenerate = true;
  }

  Rng rng(cfg.seed);
  res.head = LinearHead<float>::init("head.probe", num_classes,
                                     static_cast<int>(x_train.cols()), rng, 0.0);
  OptimizerConfig ocfg;
  ocfg.learning_rate = cfg.learning_rate;
  ocfg.weight_decay = cfg.weight_decay;
  AdamW<float> opt(ocfg);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Graph<float> g;
    auto x = g.input(x_train);
    auto logits = ner_linear_head(g, x, res.head);
    auto loss = g.cross_entropy_rows(logits, y_train);
    g.backward(loss);
    GradientSet<float> grads;
    for (Parameter<float>* p : res.head.parameters()) grads.add(p, g.grad(*p));
    opt.step(grads.entries);
  }
  res.train_accuracy = probe_accuracy(res.head, x_train, y_train);
  res.test_accuracy = probe_accuracy(res.head, x_test, y_test);
  return res;
}

}  // namespace tplf
