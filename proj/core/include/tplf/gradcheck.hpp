#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "tplf/graph.hpp"

namespace tplf {

template <class S>
struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  double worst_analytic = 0.0;
  double worst_fd = 0.0;
  int checked_coords = 0;
  double tolerance = 0.0;

  bool pass() const { return max_rel_error <= tolerance; }
};

// Central finite differences against the tape's analytic gradient. build_loss
// must construct the loss graph from the current parameter values; it is
// re-evaluated under coordinate perturbations, so it has to be deterministic
// (eval mode, fixed batches).
template <class S>
GradCheckReport<S> gradient_check(
    const std::function<typename Graph<S>::Var(Graph<S>&)>& build_loss,
    const std::vector<Parameter<S>*>& params, S eps, double tolerance, uint64_t seed = 0,
    int max_coords_per_param = 16) {
  GradCheckReport<S> report;
  report.tolerance = tolerance;

  Graph<S> g;
  auto loss = build_loss(g);
  g.backward(loss);

  auto eval = [&]() -> double {
    Graph<S> h;
    return static_cast<double>(h.value(build_loss(h))(0, 0));
  };

  Rng rng(seed);
  for (Parameter<S>* p : params) {
    Mat<S> analytic = g.grad(*p);
    const Eigen::Index n = p->value.size();
    std::vector<Eigen::Index> coords(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
    if (n > max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(static_cast<size_t>(max_coords_per_param));
    }
    for (Eigen::Index c : coords) {
      const S saved = p->value.data()[c];
      p->value.data()[c] = saved + eps;
      double f_plus = eval();
      p->value.data()[c] = saved - eps;
      double f_minus = eval();
      p->value.data()[c] = saved;
      double fd = (f_plus - f_minus) / (2.0 * static_cast<double>(eps));
      double an = static_cast<double>(analytic.data()[c]);
      double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1.0});
      ++report.checked_coords;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = p->name + "[" + std::to_string(c) + "]";
        report.worst_analytic = an;
        report.worst_fd = fd;
      }
    }
  }
  return report;
}

}  // namespace tplf
