#include "rsagame/analysis.hpp"
#include "rsagame/corpus.hpp"
#include "rsagame/meaning.hpp"
#include "rsagame/rsa.hpp"
#include "rsagame/utterance.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace rsagame;

namespace {

ReferenceGame seven_object_game() {
  return generate_synthetic(17, AttributeSchema::furniture(), 7, 1).games.at(0);
}

void BM_LogicalUtterances(benchmark::State& state) {
  const auto game = seven_object_game();
  for (auto _ : state) benchmark::DoNotOptimize(logical_utterances(game));
}
BENCHMARK(BM_LogicalUtterances);

void BM_RuleMatrix(benchmark::State& state) {
  const auto game = seven_object_game();
  const auto space = logical_utterances(game);
  const auto lex = Lexicon::default_for(game.schema);
  for (auto _ : state) benchmark::DoNotOptimize(rule_matrix(game, space, lex));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(space.utterances.size() * 7));
}
BENCHMARK(BM_RuleMatrix);

// Listener plus speaker over a random table of `range(0)` utterances × 7 objects.
void BM_Speaker(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  MeaningMatrix m{"bench", MfKind::prompt, "", rows, 7, std::vector<double>(rows * 7)};
  for (auto& v : m.values) v = u01(rng);
  std::vector<double> costs(rows);
  for (auto& c : costs) c = static_cast<double>(1 + rng() % 6);
  const SpeakerConfig cfg{1.0, CostMode::word_count, {}};
  for (auto _ : state) {
    const auto listener = literal_listener(m);
    benchmark::DoNotOptimize(pragmatic_speaker(listener, costs, cfg));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows * 7));
}
BENCHMARK(BM_Speaker)->Arg(16)->Arg(128)->Arg(1024);

void BM_Spearman(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(4);
  std::normal_distribution<double> gauss;
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = gauss(rng);
    y[i] = static_cast<double>(rng() % 10);
  }
  for (auto _ : state) benchmark::DoNotOptimize(spearman(x, y));
}
BENCHMARK(BM_Spearman)->Arg(64)->Arg(4096)->Arg(100000);

}  // namespace
BENCHMARK_MAIN();
