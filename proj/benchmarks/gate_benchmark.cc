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

#include <cmath>
#include <vector>

#include "ifcmoe/bench.h"
#include "ifcmoe/embedding.h"
#include "ifcmoe/gating.h"
#include "ifcmoe/policy.h"
#include "ifcmoe/random.h"

namespace ifcmoe {
namespace {

constexpr std::size_t kDim = 64;

EmbeddingVector random_query(std::uint64_t seed) {
  Rng rng(seed);
  EmbeddingVector q;
  q.values.resize(kDim);
  for (double& v : q.values) v = rng.normal();
  return q;
}

void BM_GatePairwise(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const DomainVectorTable vectors = synthetic_domain_vectors(m, kDim, 32, 11);
  const DomainStats stats(std::vector<std::uint64_t>(m, 1000));
  const AccessPolicy policy = AccessPolicy::all(m);
  const SizePrior prior = make_size_prior(stats, policy, SizeDenominator::kAccessible, 0.2);
  const EmbeddingVector query = random_query(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gate_pairwise(query, policy, 3, prior, stats, vectors));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_GatePairwise)->RangeMultiplier(10)->Range(100, 100000)->Complexity(benchmark::oNLogN);

void BM_GateCluster(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto s = static_cast<std::size_t>(state.range(1));
  const DomainVectorTable vectors = synthetic_domain_vectors(m, kDim, 32, 11);
  const DomainStats stats(std::vector<std::uint64_t>(m, 1000));
  const AccessPolicy policy = AccessPolicy::all(m);
  const SizePrior prior = make_size_prior(stats, policy, SizeDenominator::kAccessible, 0.2);
  std::vector<DomainId> ids(policy.ids().begin(), policy.ids().end());
  const ClusterPartition partition = compute_clusters(vectors, ids, s, 7, 3);
  const EmbeddingVector query = random_query(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gate_cluster(query, policy, 3, prior, stats, partition, vectors,
                                          CentroidMode::kAllMembers));
  }
}
BENCHMARK(BM_GateCluster)
    ->Args({10000, 10})
    ->Args({10000, 100})
    ->Args({10000, 1000})
    ->Args({100000, 316});

void BM_Vectorize(benchmark::State& state) {
  const Embedder embedder{EmbeddingParams{}};
  Rng rng(5);
  TokenSeq tokens(static_cast<std::size_t>(state.range(0)));
  for (TokenId& t : tokens) t = static_cast<TokenId>(1 + rng.index(1000));
  for (auto _ : state) benchmark::DoNotOptimize(embedder.vectorize(tokens));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Vectorize)->Arg(64)->Arg(1024);

}  // namespace
}  // namespace ifcmoe

BENCHMARK_MAIN();
