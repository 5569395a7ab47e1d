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

#ifndef IFCMOE_BENCH_H_
#define IFCMOE_BENCH_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "ifcmoe/engine.h"
#include "ifcmoe/gating.h"
#include "ifcmoe/pipeline.h"

namespace ifcmoe {

// Seconds per call over repeated trials.
struct TimingStats {
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t trials = 0;
  std::size_t calls_per_trial = 0;
  // Subtracted harness cost per call.
  double overhead = 0.0;
};

struct TimingOptions {
  std::size_t trials = 5;
  // Each trial repeats the call until at least this much time has passed.
  double min_trial_seconds = 0.02;
};

// Cost of invoking an empty callable through the harness, per call.
double harness_overhead();

TimingStats time_call(const std::function<void()>& fn, const TimingOptions& options = {});

enum class Complexity { kConstant, kLog, kLinear, kMLogM, kQuadratic };

std::string_view to_string(Complexity c);
double complexity_term(Complexity c, double x);

struct FitResult {
  Complexity form = Complexity::kLinear;
  double intercept = 0.0;
  double slope = 0.0;
  double r2 = 0.0;
};

// Least squares y = intercept + slope * f(x).
FitResult fit_complexity(std::span<const double> x, std::span<const double> y, Complexity form);
std::vector<FitResult> fit_all(std::span<const double> x, std::span<const double> y);

// `m` unit-scale vectors around `topics` Gaussian centres, for gate
// scaling runs without a trained corpus.
DomainVectorTable synthetic_domain_vectors(std::size_t m, std::size_t dim, std::size_t topics,
                                           std::uint64_t seed);

struct GateTiming {
  GateBackend backend = GateBackend::kPairwise;
  std::size_t m = 0;
  std::size_t s = 0;
  std::size_t k = 0;
  std::size_t dim = 0;
  TimingStats time;
  std::string note;
};

struct GateBenchOptions {
  std::vector<std::size_t> m_values{100, 300, 1000, 3000, 10000, 30000, 100000};
  // Cluster counts per m; empty means round(sqrt(m)).
  std::vector<std::size_t> s_values;
  std::size_t k = 3;
  std::size_t dim = 64;
  std::size_t kmeans_iterations = 3;
  std::uint64_t seed = 11;
  TimingOptions timing;
};

// One record per (m, s); cluster runs with s > m are skipped with a note.
// Partitions are built outside the timed region.
std::vector<GateTiming> bench_gate(GateBackend backend, const GateBenchOptions& options);

// time = top(k) + max{(forward + ensemble) * r, top(k)} * n / r, with
// top(k) = gate(m) + vectorize(c). All per-call times in seconds;
// forward and ensemble are per token.
struct LatencyModel {
  double gate = 0.0;
  double vectorize = 0.0;
  double forward = 0.0;
  double ensemble = 0.0;
  std::size_t r = 1;

  double top() const { return gate + vectorize; }
  double window() const { return (forward + ensemble) * static_cast<double>(r); }
  double recurring(std::size_t n) const;
  double total(std::size_t n) const { return top() + recurring(n); }
};

struct PipelineBenchOptions {
  std::vector<std::size_t> use_cases{1, 10, 500};
  EngineConfig engine;
  // Test split the inputs are cut from.
  DomainId source_domain = 1;
  // Inputs per use case, cut at evenly spaced offsets.
  std::size_t inputs = 8;
  TimingOptions timing;
};

struct PipelineTiming {
  std::size_t tokens = 0;
  double measured = 0.0;
  double predicted = 0.0;
  // Single expert, no gating, same positions.
  double baseline = 0.0;
  double overhead = 0.0;
  // Measured with the k forward passes run concurrently.
  double parallel = 0.0;
  std::string note;
};

struct PipelineBench {
  LatencyModel model;
  std::vector<PipelineTiming> rows;
};

// Scores n tokens that follow a c-token sample text in unknown-label
// mode, with the whole input known in advance so re-gating can overlap.
PipelineBench bench_pipeline(const Pipeline& pipeline, const Corpus& corpus,
                             const PipelineBenchOptions& options);

// Measures the model's component times on this pipeline.
LatencyModel calibrate_latency(const Pipeline& pipeline, TokenView text,
                               const EngineConfig& engine, const TimingOptions& timing);

}  // namespace ifcmoe

#endif  // IFCMOE_BENCH_H_
