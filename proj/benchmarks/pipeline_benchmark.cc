// Copyright 2026 The ifcmoe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <benchmark/benchmark.h>

#include <memory>
#include <optional>
#include <vector>

#include "ifcmoe/corpus.h"
#include "ifcmoe/engine.h"
#include "ifcmoe/ensemble.h"
#include "ifcmoe/pipeline.h"

namespace ifcmoe {
namespace {

struct Fixture {
  Corpus corpus;
  std::unique_ptr<Pipeline> pipeline;

  Fixture() : corpus(synth_corpus(SynthSpec{})) {
    pipeline = std::make_unique<Pipeline>(Pipeline::train(corpus, TrainConfig{}));
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

// Sample text plus n scored tokens, as in the 1/10/500-token use cases.
void BM_SecurePipeline(benchmark::State& state) {
  const Fixture& f = fixture();
  EngineConfig config;
  config.parallel_experts = state.range(1) != 0;
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const TokenSeq& test = f.corpus.domain(1).test;
  const TokenView input = TokenView(test).first(config.gate.c + n);
  const AccessPolicy policy = AccessPolicy::all(f.pipeline->m());
  for (auto _ : state) {
    benchmark::DoNotOptimize(infer(*f.pipeline, input, policy, std::nullopt, config, false));
  }
}
BENCHMARK(BM_SecurePipeline)
    ->ArgsProduct({{1, 10, 500}, {0, 1}})
    ->Unit(benchmark::kMicrosecond);

void BM_SingleExpert(benchmark::State& state) {
  const Fixture& f = fixture();
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const TokenSeq& test = f.corpus.domain(1).test;
  const Expert& expert = f.pipeline->experts()[0];
  std::vector<double> dist(f.pipeline->vocab_size());
  for (auto _ : state) {
    for (std::size_t p = 64; p < 64 + n; ++p) {
      expert.next_token_dist(TokenView(test).first(p), dist);
      benchmark::DoNotOptimize(dist.data());
    }
  }
}
BENCHMARK(BM_SingleExpert)->Arg(1)->Arg(10)->Arg(500)->Unit(benchmark::kMicrosecond);

void BM_PosteriorUpdate(benchmark::State& state) {
  const std::vector<DomainId> ids{1, 2, 3};
  const std::vector<double> logp{-2.0, -3.0, -4.5};
  PosteriorWeights w = init_weights(ids);
  for (auto _ : state) {
    update_posterior(w, logp);
    benchmark::DoNotOptimize(w.weights.data());
  }
}
BENCHMARK(BM_PosteriorUpdate);

}  // namespace
}  // namespace ifcmoe

BENCHMARK_MAIN();
