#include <benchmark/benchmark.h>

#include <map>
#include <string>

#include "kriss/matcher.hpp"
#include "kriss/rng.hpp"

namespace {

std::string random_word(kriss::Rng& rng, std::size_t len) {
  std::string w;
  for (std::size_t i = 0; i < len; ++i) w += static_cast<char>('a' + kriss::uniform_index(rng, 8));
  return w;
}

void BM_MatcherScan(benchmark::State& state) {
  kriss::Rng rng(1);
  std::map<std::string, std::string> surfaces;
  while (surfaces.size() < static_cast<std::size_t>(state.range(1))) {
    surfaces.emplace(random_word(rng, 3 + kriss::uniform_index(rng, 5)), "E" + std::to_string(surfaces.size()));
  }
  const kriss::Matcher matcher(surfaces);
  std::string text;
  while (text.size() < static_cast<std::size_t>(state.range(0))) {
    text += random_word(rng, 2 + kriss::uniform_index(rng, 6));
    text += ' ';
  }
  for (auto _ : state) benchmark::DoNotOptimize(matcher.scan(text));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_MatcherScan)->Args({1 << 14, 100})->Args({1 << 17, 1000})->Args({1 << 17, 10000});

}  // namespace
