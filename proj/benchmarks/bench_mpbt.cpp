#include <benchmark/benchmark.h>

#include <vector>

#include "mpbt/edge_process.hpp"
#include "mpbt/gdist.hpp"
#include "mpbt/identify.hpp"
#include "mpbt/linalg.hpp"
#include "mpbt/params.hpp"
#include "mpbt/rng.hpp"
#include "mpbt/tree_sim.hpp"

namespace {

mpbt::ModelParams reference() {
  Eigen::VectorXd pi(2), lambda(2);
  pi << 0.5, 0.5;
  lambda << 0.1, 0.5;
  Eigen::MatrixXd s(2, 2);
  s << 0.0, 0.1, 0.2, 0.0;
  return mpbt::ModelParams::create(pi, lambda, s);
}

void bm_matrix_exp(benchmark::State& state) {
  const mpbt::ModelParams p = reference();
  const mpbt::DerivedMatrices d = mpbt::derive(p);
  for (auto _ : state)
    benchmark::DoNotOptimize(mpbt::matrix_exp(d.U * 1.7));
}
BENCHMARK(bm_matrix_exp);

void bm_sample_edge(benchmark::State& state) {
  const mpbt::ModelParams p = reference();
  const mpbt::EdgeSampler sampler(p);
  mpbt::Rng rng(1);
  for (auto _ : state)
    benchmark::DoNotOptimize(sampler.sample_outcome(0, 1e300, rng));
}
BENCHMARK(bm_sample_edge);

void bm_simulate_tree(benchmark::State& state) {
  const mpbt::ModelParams p = reference();
  const double depth = static_cast<double>(state.range(0));
  std::uint64_t k = 0;
  for (auto _ : state) {
    mpbt::Rng rng(2, k++);
    benchmark::DoNotOptimize(mpbt::simulate_tree(p, depth, rng));
  }
}
BENCHMARK(bm_simulate_tree)->Arg(10)->Arg(20);

void bm_density(benchmark::State& state) {
  const mpbt::ModelParams p = reference();
  const mpbt::GDensityEvaluator eval(p);
  double x = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(eval.density(1.0 + x, 2.0, 0.5));
    x += 1e-9;
  }
}
BENCHMARK(bm_density);

void bm_negative_loglik(benchmark::State& state) {
  const mpbt::ModelParams p = reference();
  const mpbt::AnalyticTripleSampler sampler(p);
  mpbt::Rng rng(3);
  std::vector<mpbt::EdgeTriple> triples;
  triples.reserve(1000);
  for (int i = 0; i < 1000; ++i) triples.push_back(sampler.sample(rng));
  for (auto _ : state)
    benchmark::DoNotOptimize(mpbt::negative_loglik(triples, p));
}
BENCHMARK(bm_negative_loglik);

}  // namespace

BENCHMARK_MAIN();
