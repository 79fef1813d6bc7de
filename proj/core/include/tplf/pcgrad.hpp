#pragma once

#include <utility>

#include "tplf/common.hpp"

namespace tplf {

// Gradient surgery for two tasks: when the flattened gradients conflict
// (negative dot product), each is projected onto the normal plane of the
// other's raw gradient. Non-conflicting pairs pass through bitwise; a
// zero-norm counterpart also passes through.
template <class S>
std::pair<Mat<S>, Mat<S>> pcgrad_project(const Mat<S>& g_a, const Mat<S>& g_b) {
  if (g_a.rows() != g_b.rows() || g_a.cols() != g_b.cols())
    throw ConfigError("pcgrad_project: gradient shapes disagree");
  const double dot = g_a.cwiseProduct(g_b).sum();
  if (dot >= 0.0) return {g_a, g_b};
  const double nb2 = g_b.squaredNorm();
  const double na2 = g_a.squaredNorm();
  Mat<S> a = nb2 > 0.0 ? Mat<S>(g_a - S(dot / nb2) * g_b) : g_a;
  Mat<S> b = na2 > 0.0 ? Mat<S>(g_b - S(dot / na2) * g_a) : g_b;
  return {std::move(a), std::move(b)};
}

}  // namespace tplf
