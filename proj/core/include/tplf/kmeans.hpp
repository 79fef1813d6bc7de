#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "tplf/common.hpp"

namespace tplf {

struct KmeansConfig {
  int k = 200;
  int batch_size = 1024;
  int epochs = 10;  // full passes over the point pool
  uint64_t seed = 0;

  void validate() const {
    if (k < 1) throw ConfigError("KmeansConfig: k must be >= 1");
    if (batch_size < 1) throw ConfigError("KmeansConfig: batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("KmeansConfig: epochs must be >= 1");
  }
};

template <class S>
struct ClusterModel {
  Mat<S> centroids;  // k x dim
  double inertia = 0.0;

  int k() const { return static_cast<int>(centroids.rows()); }
};

namespace detail {

// Nearest centroid by squared Euclidean distance; ties go to the lowest index.
template <class S>
int nearest_centroid(const Mat<S>& centroids, const Eigen::Ref<const Eigen::Matrix<S, 1, Eigen::Dynamic, Eigen::RowMajor>>& p,
                     double* dist_out = nullptr) {
  int best = 0;
  double best_d = (centroids.row(0) - p).squaredNorm();
  for (int c = 1; c < centroids.rows(); ++c) {
    double d = (centroids.row(c) - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist_out) *dist_out = best_d;
  return best;
}

template <class S>
Mat<S> kmeans_pp_seed(const Mat<S>& points, int k, Rng& rng) {
  const Eigen::Index n = points.rows();
  Mat<S> centroids(k, points.cols());
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centroids.row(0) = points.row(first(rng));
  std::vector<double> d2(static_cast<size_t>(n));
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::max();
      for (int j = 0; j < c; ++j)
        best = std::min(best, static_cast<double>((points.row(i) - centroids.row(j)).squaredNorm()));
      d2[static_cast<size_t>(i)] = best;
      total += best;
    }
    if (total <= 0.0) {
      // all remaining mass on existing centroids: fall back to uniform choice
      centroids.row(c) = points.row(first(rng));
      continue;
    }
    std::uniform_real_distribution<double> u(0.0, total);
    double target = u(rng), acc = 0.0;
    Eigen::Index pick = n - 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      acc += d2[static_cast<size_t>(i)];
      if (acc >= target) {
        pick = i;
        break;
      }
    }
    centroids.row(c) = points.row(pick);
  }
  return centroids;
}

}  // namespace detail

template <class S>
std::vector<int> assign_clusters(const ClusterModel<S>& model, const Mat<S>& points) {
  if (points.rows() > 0 && points.cols() != model.centroids.cols())
    throw ConfigError("assign_clusters: point dim " + std::to_string(points.cols()) +
                      " differs from centroid dim " + std::to_string(model.centroids.cols()));
  std::vector<int> labels(static_cast<size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    labels[static_cast<size_t>(i)] = detail::nearest_centroid<S>(model.centroids, points.row(i));
  return labels;
}

template <class S>
double kmeans_inertia(const Mat<S>& centroids, const Mat<S>& points) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    double d;
    detail::nearest_centroid<S>(centroids, points.row(i), &d);
    total += d;
  }
  return total;
}

// Mini-batch k-means with k-means++ seeding and per-centroid learning rate
// 1/count. Empty centroids are re-seeded to the point currently farthest from
// its assigned centroid. snapshot_inertia, when given, receives the full-pool
// inertia after every epoch.
template <class S>
ClusterModel<S> minibatch_kmeans(const Mat<S>& points, const KmeansConfig& cfg,
                                 std::vector<double>* snapshot_inertia = nullptr) {
  cfg.validate();
  const Eigen::Index n = points.rows();
  if (n < cfg.k) throw ConfigError("minibatch_kmeans: fewer points than clusters");

  Rng rng(cfg.seed);
  ClusterModel<S> model;
  model.centroids = detail::kmeans_pp_seed<S>(points, cfg.k, rng);
  std::vector<int64_t> counts(static_cast<size_t>(cfg.k), 0);

  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  auto reseed_empty = [&]() {
    std::vector<int> assign = assign_clusters(model, points);
    std::vector<bool> seen(static_cast<size_t>(cfg.k), false);
    for (int a : assign) seen[static_cast<size_t>(a)] = true;
    for (int c = 0; c < cfg.k; ++c) {
      if (seen[static_cast<size_t>(c)]) continue;
      Eigen::Index far = 0;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        double d = (points.row(i) - model.centroids.row(assign[static_cast<size_t>(i)])).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      model.centroids.row(c) = points.row(far);
      counts[static_cast<size_t>(c)] = 1;
      assign[static_cast<size_t>(far)] = c;
      seen[static_cast<size_t>(c)] = true;
    }
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      Eigen::Index stop = std::min<Eigen::Index>(start + cfg.batch_size, n);
      // assign the whole mini-batch against fixed centroids, then update
      std::vector<int> batch_assign(static_cast<size_t>(stop - start));
      for (Eigen::Index i = start; i < stop; ++i)
        batch_assign[static_cast<size_t>(i - start)] =
            detail::nearest_centroid<S>(model.centroids, points.row(order[static_cast<size_t>(i)]));
      for (Eigen::Index i = start; i < stop; ++i) {
        int c = batch_assign[static_cast<size_t>(i - start)];
        int64_t& cnt = counts[static_cast<size_t>(c)];
        ++cnt;
        S lr = S(1) / static_cast<S>(cnt);
        model.centroids.row(c) += lr * (points.row(order[static_cast<size_t>(i)]) - model.centroids.row(c));
      }
    }
    reseed_empty();
    if (snapshot_inertia) snapshot_inertia->push_back(kmeans_inertia(model.centroids, points));
  }
  model.inertia = kmeans_inertia(model.centroids, points);
  return model;
}

}  // namespace tplf
