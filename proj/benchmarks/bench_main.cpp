#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "e2edet/layout.hpp"
#include "e2edet/matching.hpp"
#include "e2edet/metrics.hpp"
#include "e2edet/nms.hpp"
#include "e2edet/pyramid.hpp"
#include "e2edet/rng.hpp"
#include "e2edet/sim.hpp"

namespace {

using namespace e2edet;

QualityMatrix random_quality(int g, int n, std::uint64_t seed) {
  Rng rng(seed);
  QualityMatrix q(g, n);
  for (double& v : q.values) v = rng.uniform();
  return q;
}

void BM_Hungarian(benchmark::State& state) {
  const int g = static_cast<int>(state.range(0));
  const QualityMatrix q = random_quality(g, 4 * g, 11);
  for (auto _ : state) benchmark::DoNotOptimize(hungarian_max(q));
  state.SetComplexityN(g);
}
BENCHMARK(BM_Hungarian)->RangeMultiplier(2)->Range(4, 128)->Complexity();

void BM_BruteForce9(benchmark::State& state) {
  const QualityMatrix q = random_quality(static_cast<int>(state.range(0)), 9, 12);
  for (auto _ : state) benchmark::DoNotOptimize(brute_force_match(q));
}
BENCHMARK(BM_BruteForce9)->DenseRange(2, 5);

FeaturePyramid random_pyramid(int channels, int size, int levels, std::uint64_t seed) {
  Rng rng(seed);
  FeaturePyramid p;
  double stride = 8.0;
  for (int l = 0; l < levels; ++l) {
    Grid g(channels, size, size);
    for (double& v : g.values) v = rng.uniform();
    p.levels.push_back(std::move(g));
    p.strides.push_back(stride);
    size = (size + 1) / 2;
    stride *= 2.0;
  }
  return p;
}

void BM_MaxFilter3d(benchmark::State& state) {
  const FeaturePyramid p = random_pyramid(4, static_cast<int>(state.range(0)), 5, 13);
  const FilterParams f{2, 3};
  for (auto _ : state) benchmark::DoNotOptimize(max_filter_3d(p, f));
}
BENCHMARK(BM_MaxFilter3d)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMicrosecond);

void BM_Hard3dmf(benchmark::State& state) {
  const FeaturePyramid p = random_pyramid(4, static_cast<int>(state.range(0)), 5, 14);
  for (auto _ : state) benchmark::DoNotOptimize(hard_3dmf(p, {2, 3}));
}
BENCHMARK(BM_Hard3dmf)->Arg(64)->Unit(benchmark::kMicrosecond);

struct SimFixture {
  std::vector<ImageRecord> images;
  std::vector<Detection> dets;
  std::vector<double> strides;
};

const SimFixture& sim_fixture() {
  static const SimFixture fx = [] {
    SimFixture s;
    SceneConfig sc;
    sc.crowding = 0.5;
    s.images = gen_scenes(sc, 50);
    OracleConfig oc;
    for (const ImageRecord& im : s.images) {
      const PyramidLayout layout = PyramidLayout::fcos_default(im.width, im.height);
      s.strides = layout.strides();
      OracleOutput o = oracle_predict(im, layout, oc, sc.num_classes);
      s.dets.insert(s.dets.end(), o.dets.begin(), o.dets.end());
    }
    return s;
  }();
  return fx;
}

void BM_GreedyNms(benchmark::State& state) {
  const SimFixture& fx = sim_fixture();
  const std::vector<NmsConfig> configs = study_configs();
  const NmsConfig& cfg = configs[static_cast<std::size_t>(state.range(0))];
  for (auto _ : state) benchmark::DoNotOptimize(greedy_nms(fx.dets, cfg, fx.strides));
  state.SetLabel(std::string(cfg.across_scales ? "across/" : "per-scale/") + cfg.range_label());
  state.SetItemsProcessed(state.iterations() * static_cast<long>(fx.dets.size()));
}
BENCHMARK(BM_GreedyNms)->DenseRange(0, 4)->Unit(benchmark::kMicrosecond);

void BM_Evaluate(benchmark::State& state) {
  const SimFixture& fx = sim_fixture();
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(fx.dets, fx.images));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(fx.dets.size()));
}
BENCHMARK(BM_Evaluate)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
