#include <benchmark/benchmark.h>

#include "tplf/kmeans.hpp"

namespace {

void BM_MinibatchKmeans(benchmark::State& state) {
  tplf::Rng rng(7);
  std::normal_distribution<float> d(0.f, 1.f);
  tplf::Mat<float> points(4096, 32);
  for (Eigen::Index i = 0; i < points.size(); ++i) points.data()[i] = d(rng);
  tplf::KmeansConfig cfg;
  cfg.k = static_cast<int>(state.range(0));
  cfg.batch_size = 512;
  cfg.epochs = 3;
  for (auto _ : state) {
    auto model = tplf::minibatch_kmeans(points, cfg);
    benchmark::DoNotOptimize(model.inertia);
  }
}
BENCHMARK(BM_MinibatchKmeans)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace
