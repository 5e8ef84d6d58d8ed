#include <benchmark/benchmark.h>

#include "kriss/transformer.hpp"

namespace {

void BM_EncoderForward(benchmark::State& state) {
  kriss::EncoderConfig config;
  const auto params = kriss::EncoderParams::initialize(config, 500, 3);
  kriss::TokenSequence seq(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < seq.size(); ++i) seq[i] = static_cast<kriss::TokenId>(7 + i % 400);
  for (auto _ : state) benchmark::DoNotOptimize(kriss::TransformerEncoder::encode(params, seq));
}
BENCHMARK(BM_EncoderForward)->Arg(16)->Arg(32)->Arg(64)->Arg(128);

void BM_EncoderForwardBackward(benchmark::State& state) {
  kriss::EncoderConfig config;
  const auto params = kriss::EncoderParams::initialize(config, 500, 3);
  auto grads = kriss::EncoderParams::zeros(config, 500);
  kriss::TokenSequence seq(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < seq.size(); ++i) seq[i] = static_cast<kriss::TokenId>(7 + i % 400);
  const kriss::Vector d = kriss::Vector::Ones(config.dim);
  for (auto _ : state) {
    kriss::ForwardCache cache;
    kriss::TransformerEncoder::forward(params, seq, cache);
    kriss::TransformerEncoder::backward(params, cache, d, grads);
  }
}
BENCHMARK(BM_EncoderForwardBackward)->Arg(24)->Arg(64);

}  // namespace
