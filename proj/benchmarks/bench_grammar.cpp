#include <benchmark/benchmark.h>

#include <string>

#include "rank_reward/response_grammar.hpp"

using namespace rank_reward;

namespace {

std::string response(int words) {
  std::string think;
  for (int i = 0; i < words; ++i) think += "token" + std::to_string(i % 37) + ' ';
  return "<think>" + think + "<look>region 1</look></think><answer>"
         "[{\"bbox_2d\": [10, 20, 110, 220], \"point_2d\": [60, 120]},"
         " {\"bbox_2d\": [300, 40, 380, 90], \"point_2d\": [340, 65]}]</answer>";
}

}  // namespace

static void BM_ParseAndScore(benchmark::State& state) {
  const auto text = response(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    const auto parsed = grammar::parse_response(text);
    benchmark::DoNotOptimize(grammar::score_format(parsed));
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_ParseAndScore)->Arg(20)->Arg(200)->Arg(2000);

static void BM_ValidateAnswer(benchmark::State& state) {
  const std::string answer =
      "[{\"bbox_2d\": [10, 20, 110, 220], \"point_2d\": [60, 120]},"
      " {\"bbox_2d\": [300, 40, 380, 90], \"point_2d\": [340, 65]}]";
  for (auto _ : state) benchmark::DoNotOptimize(grammar::validate_answer(answer));
}
BENCHMARK(BM_ValidateAnswer);
