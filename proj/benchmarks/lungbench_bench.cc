#include <vector>

#include <benchmark/benchmark.h>

#include "lungbench/graph.h"
#include "lungbench/metrics.h"
#include "lungbench/models.h"
#include "lungbench/random.h"
#include "lungbench/train.h"

namespace lungbench {
namespace {

Tensor Random(const Shape& shape, Rng& rng, bool requires_grad = false) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  std::vector<double> v(n);
  for (double& x : v) x = rng.Uniform(-1, 1);
  return Tensor::FromValues(shape, std::move(v), requires_grad);
}

void BM_Conv2dForward(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor in = Random({8, side, side}, rng);
  const Tensor k = Random({8, 8, 3, 3}, rng);
  const Tensor b = Random({8}, rng);
  for (auto _ : state) {
    Graph g(GradMode::kDisabled);
    benchmark::DoNotOptimize(g.Conv2d(in, k, b, 1, 1));
  }
}
BENCHMARK(BM_Conv2dForward)->Arg(16)->Arg(32)->Arg(64);

void BM_MatMul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const Tensor a = Random({n, n}, rng);
  const Tensor b = Random({n, n}, rng);
  for (auto _ : state) {
    Graph g(GradMode::kDisabled);
    benchmark::DoNotOptimize(g.MatMul(a, b));
  }
}
BENCHMARK(BM_MatMul)->Arg(32)->Arg(64)->Arg(128);

void BM_TrainStep(benchmark::State& state) {
  ModelSpec spec;
  spec.kind = static_cast<ModelKind>(state.range(0));
  spec.input_side = 32;
  spec.init_seed = 3;
  Model model = BuildModel(spec);
  Rng rng(4);
  const Tensor batch = Random({16, 1, 32, 32}, rng);
  std::vector<int> labels(16);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 5);
  for (auto _ : state) {
    model.ZeroGrad();
    Graph g;
    g.Backward(CrossEntropy(g, model.Forward(g, batch), labels));
  }
  state.SetLabel(std::string(ModelKindName(spec.kind)));
}
BENCHMARK(BM_TrainStep)
    ->Arg(static_cast<int>(ModelKind::kBasicCnn))
    ->Arg(static_cast<int>(ModelKind::kResNetStyle))
    ->Arg(static_cast<int>(ModelKind::kViT))
    ->Unit(benchmark::kMillisecond);

void BM_Auc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(5);
  std::vector<double> scores(n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = rng.Uniform();
    labels[i] = static_cast<int>(i % 2);
  }
  for (auto _ : state) benchmark::DoNotOptimize(Auc(ComputeRocCurve(scores, labels)));
}
BENCHMARK(BM_Auc)->Arg(1000)->Arg(100000);

}  // namespace
}  // namespace lungbench

BENCHMARK_MAIN();
