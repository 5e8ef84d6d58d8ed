#include <benchmark/benchmark.h>

#include "kriss/prototype_index.hpp"
#include "kriss/rng.hpp"

namespace {

kriss::VectorIndex random_index(std::size_t rows, std::size_t dim, std::size_t entities, bool references) {
  kriss::Rng rng(7);
  kriss::VectorIndex index(dim);
  std::vector<float> v(dim);
  for (std::size_t r = 0; r < rows; ++r) {
    for (auto& x : v) x = kriss::uniform_float(rng, -1.0f, 1.0f);
    kriss::PrototypeMeta meta;
    meta.entity_id = "E" + std::to_string(r % entities);
    meta.example.entity_id = meta.entity_id;
    meta.example.doc_id = "d" + std::to_string(r);
    index.add(meta, v);
  }
  if (references) {
    for (std::size_t e = 0; e < entities; ++e) {
      for (auto& x : v) x = kriss::uniform_float(rng, -1.0f, 1.0f);
      index.set_reference("E" + std::to_string(e), v);
    }
  }
  return index;
}

void BM_Link(benchmark::State& state) {
  const bool fusion = state.range(1) != 0;
  const auto index = random_index(static_cast<std::size_t>(state.range(0)), 64, 1000, fusion);
  kriss::Rng rng(11);
  std::vector<float> q(64);
  for (auto& x : q) x = kriss::uniform_float(rng, -1.0f, 1.0f);
  kriss::LinkOptions opts;
  opts.fusion = fusion;
  for (auto _ : state) benchmark::DoNotOptimize(kriss::link(index, q, opts));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_Link)->Args({10000, 0})->Args({10000, 1})->Args({100000, 0});

}  // namespace
