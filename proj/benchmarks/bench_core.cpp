#include <benchmark/benchmark.h>

#include <vector>

#include "ratsnas/bench_io.hpp"
#include "ratsnas/cell.hpp"
#include "ratsnas/metrics.hpp"
#include "ratsnas/predictors.hpp"
#include "ratsnas/rng.hpp"

using namespace ratsnas;

namespace {

SynthSpec small_spec() {
  SynthSpec spec;
  spec.n_cells = 512;
  spec.seed = 11;
  return spec;
}

const Benchmark& shared_bench() {
  static const Benchmark bench = gen_synthetic(small_spec());
  return bench;
}

PredictorConfig config_of(PredictorKind kind) {
  const Benchmark& bench = shared_bench();
  PredictorConfig c;
  c.kind = kind;
  c.layers = 3;
  c.hidden = 32;
  c.vocab_size = bench.vocab.size();
  c.max_nodes = bench.max_nodes;
  return c;
}

void bench_forward(benchmark::State& state, PredictorKind kind) {
  const Benchmark& bench = shared_bench();
  const PredictorConfig config = config_of(kind);
  Rng rng(1);
  const PredictorParams params = init_params(config, rng);
  const CellGraph& cell = bench.space.entries[0].cell;
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(config, params, cell));
  }
}

void bench_train_epoch(benchmark::State& state) {
  const Benchmark& bench = shared_bench();
  const PredictorConfig config = config_of(PredictorKind::kRatsGcn);
  std::vector<TrainExample> pool;
  for (std::size_t i = 0; i < 30; ++i) {
    pool.push_back(
        {bench.space.entries[i].cell, bench.space.entries[i].accuracy});
  }
  TrainOptions opt;
  opt.epochs = 1;
  opt.lr = 1e-3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_predictor(config, pool, opt));
  }
}

void bench_predict_all(benchmark::State& state) {
  const Benchmark& bench = shared_bench();
  const PredictorConfig config = config_of(PredictorKind::kRatsGcn);
  Rng rng(2);
  const PredictorParams params = init_params(config, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(predict_all(config, params, bench.space));
  }
}

void bench_spearman(benchmark::State& state) {
  Rng rng(3);
  const std::size_t n = std::size_t(state.range(0));
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = rng.uniform();
    b[i] = rng.uniform();
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(spearman(a, b));
  }
}

void bench_normalize_adjacency(benchmark::State& state) {
  Rng rng(4);
  Tensor a = Tensor::matrix(8, 8);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = i + 1; j < 8; ++j)
      if (rng.uniform() < 0.5) a(i, j) = 1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(normalize_adjacency(a));
  }
}

void bench_gen_synthetic(benchmark::State& state) {
  SynthSpec spec = small_spec();
  spec.n_cells = std::size_t(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(gen_synthetic(spec));
  }
}

}  // namespace

BENCHMARK_CAPTURE(bench_forward, mlp, PredictorKind::kMlp);
BENCHMARK_CAPTURE(bench_forward, gcn, PredictorKind::kGcn);
BENCHMARK_CAPTURE(bench_forward, bi_gcn, PredictorKind::kBiGcn);
BENCHMARK_CAPTURE(bench_forward, rats_gcn, PredictorKind::kRatsGcn);
BENCHMARK(bench_train_epoch);
BENCHMARK(bench_predict_all);
BENCHMARK(bench_spearman)->Arg(1000)->Arg(15625);
BENCHMARK(bench_normalize_adjacency);
BENCHMARK(bench_gen_synthetic)->Arg(256)->Arg(4096);

BENCHMARK_MAIN();
