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

#include "ifcmoe/bench.h"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "ifcmoe/error.h"
#include "ifcmoe/random.h"

namespace ifcmoe {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double run_calls(const std::function<void()>& fn, std::size_t calls) {
  const auto start = Clock::now();
  for (std::size_t i = 0; i < calls; ++i) fn();
  return seconds_since(start);
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

double harness_overhead() {
  static const double overhead = [] {
    volatile int sink = 0;
    const std::function<void()> empty = [&sink] { sink = sink + 1; };
    constexpr std::size_t kCalls = 1 << 20;
    double best = run_calls(empty, kCalls);
    for (int i = 0; i < 4; ++i) best = std::min(best, run_calls(empty, kCalls));
    return best / kCalls;
  }();
  return overhead;
}

TimingStats time_call(const std::function<void()>& fn, const TimingOptions& options) {
  if (options.trials == 0) throw ConfigError("timing needs at least one trial");
  const double overhead = harness_overhead();
  // Warm up and size the trial.
  double single = run_calls(fn, 1);
  std::size_t calls = 1;
  while (single * static_cast<double>(calls) < options.min_trial_seconds && calls < (1u << 26)) {
    calls *= 2;
  }
  if (calls > 1) single = run_calls(fn, calls) / static_cast<double>(calls);

  std::vector<double> per_call;
  for (std::size_t t = 0; t < options.trials; ++t) {
    const double elapsed = run_calls(fn, calls);
    per_call.push_back(std::max(elapsed / static_cast<double>(calls) - overhead, 1e-12));
  }
  TimingStats out;
  out.median = median_of(per_call);
  out.min = *std::min_element(per_call.begin(), per_call.end());
  out.max = *std::max_element(per_call.begin(), per_call.end());
  out.trials = options.trials;
  out.calls_per_trial = calls;
  out.overhead = overhead;
  return out;
}

std::string_view to_string(Complexity c) {
  switch (c) {
    case Complexity::kConstant:
      return "1";
    case Complexity::kLog:
      return "log m";
    case Complexity::kLinear:
      return "m";
    case Complexity::kMLogM:
      return "m log m";
    case Complexity::kQuadratic:
      return "m^2";
  }
  return "?";
}

double complexity_term(Complexity c, double x) {
  switch (c) {
    case Complexity::kConstant:
      return 1.0;
    case Complexity::kLog:
      return std::log(x);
    case Complexity::kLinear:
      return x;
    case Complexity::kMLogM:
      return x * std::log(x);
    case Complexity::kQuadratic:
      return x * x;
  }
  return 0.0;
}

FitResult fit_complexity(std::span<const double> x, std::span<const double> y, Complexity form) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ConfigError("complexity fit needs at least two (x, y) pairs");
  }
  const double n = static_cast<double>(x.size());
  double mf = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mf += complexity_term(form, x[i]);
    my += y[i];
  }
  mf /= n;
  my /= n;
  double sff = 0.0;
  double sfy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = complexity_term(form, x[i]) - mf;
    sff += f * f;
    sfy += f * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  FitResult out;
  out.form = form;
  out.slope = sff > 0.0 ? sfy / sff : 0.0;
  out.intercept = my - out.slope * mf;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (out.intercept + out.slope * complexity_term(form, x[i]));
    sse += e * e;
  }
  out.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return out;
}

std::vector<FitResult> fit_all(std::span<const double> x, std::span<const double> y) {
  std::vector<FitResult> out;
  for (Complexity c : {Complexity::kConstant, Complexity::kLog, Complexity::kLinear,
                       Complexity::kMLogM, Complexity::kQuadratic}) {
    out.push_back(fit_complexity(x, y, c));
  }
  return out;
}

DomainVectorTable synthetic_domain_vectors(std::size_t m, std::size_t dim, std::size_t topics,
                                           std::uint64_t seed) {
  if (m == 0 || dim == 0 || topics == 0) throw ConfigError("empty synthetic vector table");
  Rng rng(seed);
  std::vector<std::vector<double>> centres(topics, std::vector<double>(dim));
  for (auto& c : centres) {
    for (double& x : c) x = rng.normal();
  }
  std::vector<EmbeddingVector> vectors(m);
  for (auto& v : vectors) {
    const auto& c = centres[rng.index(topics)];
    v.values.resize(dim);
    for (std::size_t d = 0; d < dim; ++d) v.values[d] = c[d] + 0.5 * rng.normal();
  }
  return DomainVectorTable(std::move(vectors));
}

std::vector<GateTiming> bench_gate(GateBackend backend, const GateBenchOptions& options) {
  if (backend == GateBackend::kKnown) {
    throw ConfigError("bench_gate covers the pairwise and cluster backends");
  }
  std::vector<GateTiming> out;
  for (std::size_t m : options.m_values) {
    const auto topics =
        std::max<std::size_t>(2, static_cast<std::size_t>(std::sqrt(static_cast<double>(m))));
    const DomainVectorTable vectors =
        synthetic_domain_vectors(m, options.dim, topics, derive_seed(options.seed, m));
    Rng rng(derive_seed(options.seed, m + 1));
    std::vector<std::uint64_t> counts(m);
    for (auto& c : counts) c = 100 + rng.index(10000);
    const DomainStats stats(counts);
    const AccessPolicy policy = AccessPolicy::all(m);
    const SizePrior prior = make_size_prior(stats, policy, SizeDenominator::kAccessible, 0.2);
    std::vector<EmbeddingVector> queries(16);
    for (auto& q : queries) q = vectors.at(static_cast<DomainId>(1 + rng.index(m)));
    for (auto& q : queries) {
      for (double& x : q.values) x += 0.3 * rng.normal();
    }

    std::size_t next = 0;
    auto next_query = [&]() -> const EmbeddingVector& { return queries[next++ % queries.size()]; };

    if (backend == GateBackend::kPairwise) {
      GateTiming t{backend, m, 0, options.k, options.dim, {}, ""};
      t.time = time_call(
          [&] { (void)gate_pairwise(next_query(), policy, options.k, prior, stats, vectors); },
          options.timing);
      out.push_back(t);
      continue;
    }
    std::vector<std::size_t> s_values = options.s_values;
    if (s_values.empty()) {
      s_values.push_back(std::max<std::size_t>(
          1, static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(m))))));
    }
    for (std::size_t s : s_values) {
      GateTiming t{backend, m, s, options.k, options.dim, {}, ""};
      if (s > m) {
        t.note = "skipped: s > m";
        out.push_back(t);
        continue;
      }
      const ClusterPartition partition = compute_clusters(
          vectors, policy.ids(), s, derive_seed(options.seed, s), options.kmeans_iterations);
      t.time = time_call(
          [&] {
            (void)gate_cluster(next_query(), policy, options.k, prior, stats, partition, vectors,
                               CentroidMode::kAccessibleMembers);
          },
          options.timing);
      out.push_back(t);
    }
  }
  return out;
}

double LatencyModel::recurring(std::size_t n) const {
  return std::max(window(), top()) * static_cast<double>(n) / static_cast<double>(r);
}

LatencyModel calibrate_latency(const Pipeline& pipeline, TokenView text,
                               const EngineConfig& engine, const TimingOptions& timing) {
  const GateConfig& g = engine.gate;
  if (text.size() < g.c + 64) throw DataError("calibration text too short");
  const AccessPolicy policy = AccessPolicy::all(pipeline.m());
  const SizePrior prior =
      make_size_prior(pipeline.stats(), policy, engine.size_denominator, g.lambda);
  const TokenView sample = text.first(g.c);
  const EmbeddingVector query = pipeline.embedder().vectorize(sample);

  LatencyModel model;
  model.r = g.r;
  model.vectorize =
      time_call([&] { (void)pipeline.embedder().vectorize(sample); }, timing).median;

  std::vector<DomainId> experts;
  if (engine.backend == GateBackend::kCluster) {
    const ClusterPartition partition =
        compute_clusters(pipeline.vectors(), policy.ids(), std::min(g.s, policy.size()),
                         pipeline.config().cluster_seed, pipeline.config().kmeans_iterations);
    auto gate = [&] {
      return gate_cluster(query, policy, g.k, prior, pipeline.stats(), partition,
                          pipeline.vectors(), CentroidMode::kAccessibleMembers);
    };
    experts = gate();
    model.gate = time_call([&] { (void)gate(); }, timing).median;
  } else {
    auto gate = [&] {
      return gate_pairwise(query, policy, g.k, prior, pipeline.stats(), pipeline.vectors());
    };
    experts = gate();
    model.gate = time_call([&] { (void)gate(); }, timing).median;
  }

  std::vector<const Expert*> active;
  for (DomainId id : experts) active.push_back(&pipeline.expert(id));
  std::vector<NextTokenDist> dists(active.size());
  for (auto& d : dists) d.probs.resize(pipeline.vocab_size());
  // Positions spread over the whole text; per-token cost depends on the
  // context.
  const std::size_t stride = std::max<std::size_t>(1, (text.size() - g.c) / 256);
  std::size_t pos = g.c;
  auto next_pos = [&] {
    pos = pos + stride < text.size() ? pos + stride : g.c;
    return pos;
  };
  model.forward = time_call(
                      [&] {
                        const std::size_t p = next_pos();
                        for (std::size_t j = 0; j < active.size(); ++j) {
                          active[j]->next_token_dist(text.first(p), dists[j].probs);
                        }
                      },
                      timing)
                      .median;

  for (std::size_t j = 0; j < active.size(); ++j) {
    active[j]->next_token_dist(text.first(g.c), dists[j].probs);
  }
  const PosteriorWeights start = init_weights(experts);
  PosteriorWeights w = start;
  std::vector<double> mixed(pipeline.vocab_size());
  std::vector<double> probs(active.size());
  std::vector<double> logprobs(active.size());
  std::size_t steps = 0;
  model.ensemble = time_call(
                       [&] {
                         const std::size_t p = next_pos();
                         mix_outputs(dists, w, mixed);
                         for (std::size_t j = 0; j < active.size(); ++j) {
                           probs[j] = active[j]->prob(text.first(p), text[p]);
                           logprobs[j] = std::log(probs[j]);
                         }
                         (void)mix_token(probs, w);
                         update_posterior(w, logprobs);
                         if (++steps % 4096 == 0) w = start;
                       },
                       timing)
                       .median;
  return model;
}

namespace {

void score_input(const Pipeline& pipeline, TokenView input, const AccessPolicy& policy,
                 const EngineConfig& engine, std::vector<double>& buffer) {
  Session session(pipeline, policy, std::nullopt, engine);
  session.set_lookahead(input);
  session.set_record_trace(false);
  for (TokenId t : input) {
    if (session.can_predict()) session.predict(buffer);
    session.observe(t);
  }
}

}  // namespace

PipelineBench bench_pipeline(const Pipeline& pipeline, const Corpus& corpus,
                             const PipelineBenchOptions& options) {
  const EngineConfig& engine = options.engine;
  engine.validate(pipeline.m());
  if (engine.backend == GateBackend::kKnown) {
    throw ConfigError("bench_pipeline measures the unknown-label path");
  }
  const TokenSeq& text = corpus.domain(options.source_domain).test;
  const std::size_t c = engine.gate.c;
  std::size_t longest = 0;
  for (std::size_t n : options.use_cases) longest = std::max(longest, n);
  if (text.size() < c + std::max<std::size_t>(longest, 64)) {
    throw DataError("test split of domain " + std::to_string(options.source_domain) +
                    " is too short for the requested use cases");
  }

  PipelineBench out;
  out.model = calibrate_latency(pipeline, text, engine, options.timing);
  const AccessPolicy policy = AccessPolicy::all(pipeline.m());

  const EmbeddingVector query = pipeline.embedder().vectorize(TokenView(text).first(c));
  const SizePrior prior =
      make_size_prior(pipeline.stats(), policy, engine.size_denominator, engine.gate.lambda);
  const DomainId top1 =
      gate_pairwise(query, policy, 1, prior, pipeline.stats(), pipeline.vectors()).front();
  const Expert& single = pipeline.expert(top1);

  std::vector<double> buffer(pipeline.vocab_size());
  EngineConfig parallel = engine;
  parallel.parallel_experts = true;
  for (std::size_t n : options.use_cases) {
    // Several inputs cut from across the split; each timing is the mean
    // of the per-input medians.
    const std::size_t span = text.size() - (c + n);
    const std::size_t inputs = std::max<std::size_t>(1, options.inputs);
    PipelineTiming row;
    row.tokens = n;
    for (std::size_t q = 0; q < inputs; ++q) {
      const std::size_t offset = inputs == 1 ? 0 : q * span / (inputs - 1);
      const TokenView input = TokenView(text).subspan(offset, c + n);
      row.measured +=
          time_call([&] { score_input(pipeline, input, policy, engine, buffer); }, options.timing)
              .median;
      row.baseline += time_call(
                          [&] {
                            for (std::size_t p = c; p < c + n; ++p) {
                              single.next_token_dist(input.first(p), buffer);
                            }
                          },
                          options.timing)
                          .median;
      row.parallel +=
          time_call([&] { score_input(pipeline, input, policy, parallel, buffer); },
                    options.timing)
              .median;
    }
    const double count = static_cast<double>(inputs);
    row.measured /= count;
    row.baseline /= count;
    row.parallel /= count;
    row.predicted = out.model.total(n);
    row.overhead = row.measured / row.baseline;
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace ifcmoe
