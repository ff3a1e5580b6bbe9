#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "proxdebias/debias.hpp"
#include "proxdebias/gipe.hpp"
#include "proxdebias/neighbourhood.hpp"

using namespace proxdebias;

namespace {

EmbeddingSet random_set(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<std::string> words;
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < n; ++i) {
    words.push_back("w" + std::to_string(i));
    for (std::size_t j = 0; j < dim; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = normal(rng);
  }
  return EmbeddingSet(Vocabulary(std::move(words)), std::move(m));
}

GenderDirection axis(std::size_t dim) { return GenderDirection(Vector::Unit(static_cast<Eigen::Index>(dim), 0)); }

void BM_TopKNeighbours(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto set = random_set(n, 100, 1);
  const auto& words = set.vocab().words();
  for (auto _ : state) benchmark::DoNotOptimize(top_k_neighbours(set, words, 100));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_TopKNeighbours)->RangeMultiplier(2)->Range(500, 4000)->Unit(benchmark::kMillisecond)->Complexity(
    benchmark::oNSquared);

void BM_DebiasWord(benchmark::State& state) {
  const std::size_t dim = 300;
  const auto set = random_set(static_cast<std::size_t>(state.range(0)) + 1, dim, 2);
  RepulsionSet s;
  s.word = "w0";
  for (std::size_t i = 1; i < set.size(); ++i) s.members.push_back({set.vocab().word(i), set.row(i).transpose(), 0.1});
  const Vector w = set.row(0).transpose();
  const auto g = axis(dim);
  for (auto _ : state) benchmark::DoNotOptimize(debias_word(w, s, g, {}));
}
BENCHMARK(BM_DebiasWord)->Arg(0)->Arg(10)->Arg(100)->Unit(benchmark::kMicrosecond);

void BM_Gipe(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto set = random_set(n, 50, 3);
  const auto g = axis(50);
  const auto net = build_bbn(set, set, set.vocab().words(), 100, g);
  for (auto _ : state) benchmark::DoNotOptimize(gipe(net, 0.05));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Gipe)->RangeMultiplier(2)->Range(500, 4000)->Complexity(benchmark::oN);

void BM_BuildBbn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto set = random_set(n, 50, 4);
  const auto g = axis(50);
  const auto table = top_k_neighbours(set, set.vocab().words(), 100);
  for (auto _ : state) benchmark::DoNotOptimize(build_bbn(table, set, set.vocab().words(), g));
}
BENCHMARK(BM_BuildBbn)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
