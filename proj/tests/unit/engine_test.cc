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


#include "ifcmoe/engine.h"
#include "ifcmoe/ensemble.h"

#include <gtest/gtest.h>

#include <cmath>
#include <optional>
#include <vector>

#include "ifcmoe/error.h"
#include "ifcmoe/random.h"
#include "test_support.h"

namespace ifcmoe {
namespace {

using ::ifcmoe::testing::small_corpus;
using ::ifcmoe::testing::small_pipeline;

EngineConfig config_with(std::size_t k, std::size_t r, std::size_t c) {
  EngineConfig e;
  e.gate.k = k;
  e.gate.r = r;
  e.gate.c = c;
  e.gate.s = 2;
  return e;
}

TokenView test_text(DomainId d) { return small_corpus().domain(d).test; }

TEST(EngineConfigTest, Validation) {
  EngineConfig e;
  EXPECT_NO_THROW(e.validate(4));
  e.cluster_source = ClusterSource::kOffline;
  EXPECT_THROW(e.validate(4), ConfigError);
  e.strict = false;
  EXPECT_NO_THROW(e.validate(4));
  EXPECT_EQ(parse_backend("cluster"), GateBackend::kCluster);
  EXPECT_EQ(to_string(GateBackend::kKnown), "known");
  EXPECT_THROW(parse_backend("nearest"), ConfigError);
  EXPECT_EQ(parse_cluster_source(to_string(ClusterSource::kOffline)), ClusterSource::kOffline);
}

TEST(SessionTest, ConstructionErrors) {
  const Pipeline& p = small_pipeline();
  EngineConfig e = config_with(2, 64, 32);
  EXPECT_THROW(Session(p, AccessPolicy::all(5), std::nullopt, e), ConfigError);
  EXPECT_THROW(Session(p, AccessPolicy({1, 2}, 4), DomainId{3}, e), PolicyViolation);
  e.backend = GateBackend::kKnown;
  EXPECT_THROW(Session(p, AccessPolicy({1, 2}, 4), std::nullopt, e), ConfigError);
  e.backend = GateBackend::kPairwise;
  e.label_fallback = true;
  Session s(p, AccessPolicy({1, 2}, 4), DomainId{3}, e);
  EXPECT_FALSE(s.known_mode());
  EXPECT_EQ(s.first_scored_position(), 32u);
}

TEST(SessionTest, NothingIsScoredBeforeTheSampleText) {
  const Pipeline& p = small_pipeline();
  Session s(p, AccessPolicy::all(4), std::nullopt, config_with(2, 64, 32));
  const TokenView x = test_text(1);
  for (std::size_t i = 0; i < 32; ++i) {
    EXPECT_FALSE(s.can_predict());
    EXPECT_TRUE(std::isnan(s.observe(x[i])));
  }
  EXPECT_TRUE(s.can_predict());
  EXPECT_THROW(
      infer_unknown(p, x.first(32), AccessPolicy::all(4), config_with(2, 64, 32)), DataError);
}

TEST(SessionTest, SingletonPolicyEqualsTheLoneExpert) {
  const Pipeline& p = small_pipeline();
  for (DomainId d = 1; d <= 4; ++d) {
    const AccessPolicy only({d}, 4);
    const TokenView x = test_text(d);
    const double expert_ppl = perplexity(p.experts()[d - 1], x);
    const EvalReport known = evaluate(p, x, only, d, config_with(3, 64, 32));
    EXPECT_NEAR(known.perplexity, expert_ppl, 1e-12 * expert_ppl);
    EXPECT_EQ(known.scored, x.size());

    const EvalReport unknown = evaluate(p, x, only, std::nullopt, config_with(3, 64, 32));
    const double ll = log_likelihood(p.experts()[d - 1], x.subspan(32), x.first(32));
    const double ref = std::exp(-ll / static_cast<double>(x.size() - 32));
    EXPECT_NEAR(unknown.perplexity, ref, 1e-12 * ref);
  }
}

TEST(SessionTest, OneGateEventWhenRCoversTheInput) {
  const Pipeline& p = small_pipeline();
  const TokenView x = test_text(2).first(400);
  const InferenceResult r =
      infer_unknown(p, x, AccessPolicy::all(4), config_with(2, 1000, 32));
  EXPECT_EQ(r.gate_events.size(), 1u);
  EXPECT_EQ(r.outputs.size(), 400u - 32u);
  const InferenceResult k = infer_known(p, x, AccessPolicy::all(4), 2, config_with(2, 16, 32));
  EXPECT_EQ(k.gate_events.size(), 1u);
  EXPECT_EQ(k.outputs.size(), 400u);
}

TEST(SessionTest, TraceFollowsWindowBoundaries) {
  const Pipeline& p = small_pipeline();
  const std::size_t r = 50;
  const std::size_t c = 20;
  const TokenView x = test_text(3).first(437);
  const InferenceResult res =
      infer_unknown(p, x, AccessPolicy({1, 2, 3}, 4), config_with(2, r, c));
  ASSERT_EQ(res.trace.size(), x.size() - c);
  ASSERT_EQ(res.gate_events.size(), (x.size() - c + r - 1) / r);
  for (std::size_t j = 0; j < res.gate_events.size(); ++j) {
    const GateEvent& e = res.gate_events[j];
    EXPECT_EQ(e.window, j);
    EXPECT_EQ(e.sample_begin, j * r);
    EXPECT_EQ(e.sample_end, j * r + c);
    EXPECT_EQ(e.active_from, j * r + c);
  }
  for (const TraceRecord& t : res.trace) {
    const std::size_t w = (t.position - c) / r;
    ASSERT_EQ(t.experts, res.gate_events[w].experts) << t.position;
    ASSERT_EQ(t.token, x[t.position]);
  }
}

TEST(SessionTest, TopicSwitchChangesTheSelectionAtTheNextRegate) {
  const Pipeline& p = small_pipeline();
  TokenSeq x(test_text(1).begin(), test_text(1).begin() + 512);
  x.insert(x.end(), test_text(4).begin(), test_text(4).begin() + 512);
  const InferenceResult r = infer_unknown(p, x, AccessPolicy::all(4), config_with(1, 128, 128));
  // Window 3 samples [384, 512) from the first topic; window 4 samples
  // [512, 640) from the second.
  ASSERT_GE(r.gate_events.size(), 5u);
  EXPECT_EQ(r.gate_events[3].experts, (std::vector<DomainId>{1}));
  EXPECT_EQ(r.gate_events[4].experts, (std::vector<DomainId>{4}));
}

TEST(SessionTest, PairwiseEqualsSingleClusterEndToEnd) {
  const Pipeline& p = small_pipeline();
  EngineConfig pair = config_with(3, 64, 32);
  EngineConfig clus = pair;
  clus.backend = GateBackend::kCluster;
  clus.gate.s = 1;
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const AccessPolicy policy = testing::random_policy(rng, 4);
    const TokenView x = test_text(static_cast<DomainId>(1 + rng.index(4))).first(300);
    const InferenceResult a = infer_unknown(p, x, policy, pair);
    const InferenceResult b = infer_unknown(p, x, policy, clus);
    ASSERT_EQ(a.outputs, b.outputs);
    ASSERT_EQ(a.trace, b.trace);
  }
}

TEST(SessionTest, UseCaseShapes) {
  const Pipeline& p = small_pipeline();
  const EngineConfig e = config_with(3, 64, 32);
  for (std::size_t n : {1u, 500u}) {
    const TokenView x = test_text(1).first(32 + n);
    EXPECT_EQ(infer_unknown(p, x, AccessPolicy::all(4), e).outputs.size(), n);
  }
}

TEST(SessionTest, ExecutionOptionsDoNotChangeResults) {
  const Pipeline& p = small_pipeline();
  const EngineConfig base = config_with(3, 40, 16);
  EngineConfig serial = base;
  serial.overlap_regating = false;
  EngineConfig parallel = base;
  parallel.parallel_experts = true;
  const TokenView x = test_text(2).first(350);
  const AccessPolicy policy({1, 2, 4}, 4);
  const InferenceResult a = infer_unknown(p, x, policy, base);
  const InferenceResult b = infer_unknown(p, x, policy, serial);
  const InferenceResult c = infer_unknown(p, x, policy, parallel);
  EXPECT_EQ(a.outputs, b.outputs);
  EXPECT_EQ(a.outputs, c.outputs);
  EXPECT_EQ(a.trace, c.trace);

  // Feeding tokens one at a time without lookahead gives the same result.
  Session s(p, policy, std::nullopt, base);
  std::vector<NextTokenDist> incremental;
  for (TokenId t : x) {
    if (s.can_predict()) incremental.push_back(s.predict());
    s.observe(t);
  }
  EXPECT_EQ(incremental, a.outputs);
}

TEST(SessionTest, SessionEvidenceUsesTheWholeHistory) {
  const Pipeline& p = small_pipeline();
  EngineConfig per_gate = config_with(2, 40, 16);
  EngineConfig session = per_gate;
  session.evidence = EvidenceWindow::kSession;
  const TokenView x = test_text(1).first(200);
  const InferenceResult a = infer_unknown(p, x, AccessPolicy::all(4), per_gate);
  const InferenceResult b = infer_unknown(p, x, AccessPolicy::all(4), session);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  // Per-gate evidence starts uniform; session evidence has already seen
  // the prefix.
  const TraceRecord& first = b.trace.front();
  EXPECT_EQ(a.trace.front().weights, std::vector<double>(first.experts.size(), 0.5));
  PosteriorWeights w = init_weights(first.experts);
  for (std::size_t q = 0; q < first.position; ++q) {
    std::vector<double> lp;
    for (DomainId id : first.experts) lp.push_back(std::log(p.expert(id).prob(x.first(q), x[q])));
    update_posterior(w, lp);
  }
  EXPECT_EQ(first.weights, w.weights);
  bool differs = false;
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    if (a.trace[i].experts == b.trace[i].experts && a.trace[i].position >= 56 &&
        a.trace[i].weights != b.trace[i].weights) {
      differs = true;
    }
  }
  EXPECT_TRUE(differs);
}

TEST(SessionTest, TraceStaysInsideRandomPolicies) {
  const Pipeline& p = small_pipeline();
  Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const AccessPolicy policy = testing::random_policy(rng, 4);
    EngineConfig e = config_with(1 + rng.index(4), 16 + rng.index(64), 8 + rng.index(40));
    e.backend = rng.bernoulli(0.5) ? GateBackend::kPairwise : GateBackend::kCluster;
    const TokenView x = test_text(static_cast<DomainId>(1 + rng.index(4))).first(200);
    const InferenceResult r = infer_unknown(p, x, policy, e);
    for (const TraceRecord& t : r.trace) {
      for (DomainId id : t.experts) ASSERT_TRUE(policy.contains(id));
      ASSERT_NEAR(testing::sum(t.weights), 1.0, 1e-12);
    }
    for (const NextTokenDist& d : r.outputs) ASSERT_NEAR(testing::sum(d.probs), 1.0, 1e-9);
  }
}

TEST(SessionTest, StrictSessionsReadOnlyAccessibleArtifacts) {
  Pipeline p = small_pipeline();
  ArtifactAudit audit;
  p.set_audit(&audit);
  const AccessPolicy policy({2, 3}, 4);
  for (GateBackend b : {GateBackend::kPairwise, GateBackend::kCluster}) {
    EngineConfig e = config_with(2, 64, 32);
    e.backend = b;
    infer_unknown(p, test_text(1).first(200), policy, e);
  }
  infer_known(p, test_text(2).first(100), policy, 3, config_with(2, 64, 32));
  ASSERT_FALSE(audit.accesses().empty());
  for (DomainId d : audit.domains()) EXPECT_TRUE(policy.contains(d)) << d;
}

TEST(GenerateTest, GreedyIsDeterministic) {
  const Pipeline& p = small_pipeline();
  const TokenView prompt = test_text(1).first(40);
  const EngineConfig e = config_with(2, 64, 32);
  const Generation a = generate(p, prompt, AccessPolicy::all(4), std::nullopt, 20, {}, e);
  const Generation b = generate(p, prompt, AccessPolicy::all(4), std::nullopt, 20, {}, e);
  EXPECT_EQ(a.tokens.size(), 20u);
  EXPECT_EQ(a.tokens, b.tokens);
  EXPECT_EQ(a.trace, b.trace);
}

TEST(GenerateTest, SamplingNeedsASeedAndRepeatsWithIt) {
  const Pipeline& p = small_pipeline();
  const TokenView prompt = test_text(1).first(40);
  const EngineConfig e = config_with(2, 64, 32);
  DecodeOptions d;
  d.mode = Decoding::kSample;
  EXPECT_THROW(generate(p, prompt, AccessPolicy::all(4), std::nullopt, 5, d, e), ConfigError);
  d.seed = 9;
  const Generation a = generate(p, prompt, AccessPolicy::all(4), std::nullopt, 30, d, e);
  const Generation b = generate(p, prompt, AccessPolicy::all(4), std::nullopt, 30, d, e);
  EXPECT_EQ(a.tokens, b.tokens);
  EXPECT_THROW(generate(p, prompt.first(10), AccessPolicy::all(4), std::nullopt, 5, {}, e),
               DataError);
}

TEST(EvaluateTest, AllAccessBeatsTheBase) {
  const Pipeline& p = small_pipeline();
  for (DomainId d = 1; d <= 4; ++d) {
    EXPECT_LT(evaluate(p, test_text(d), AccessPolicy::all(4), std::nullopt,
                       config_with(3, 256, 64))
                  .normalized,
              1.0);
    EXPECT_LE(evaluate(p, test_text(d), AccessPolicy::all(4), d, config_with(3, 256, 64))
                  .normalized,
              1.0);
  }
}

TEST(EvaluateTest, KnownIsNoWorseThanUnknownOnAverage) {
  const Pipeline& p = small_pipeline();
  double known = 0.0;
  double unknown = 0.0;
  for (DomainId d = 1; d <= 4; ++d) {
    const EngineConfig e = config_with(3, 256, 64);
    known += std::log(evaluate(p, test_text(d), AccessPolicy::all(4), d, e, 64).perplexity);
    unknown +=
        std::log(evaluate(p, test_text(d), AccessPolicy::all(4), std::nullopt, e, 64).perplexity);
  }
  EXPECT_LE(known, unknown);
}

TEST(EvaluateTest, UnrelatedDomainIsNeverMuchWorseThanTheBase) {
  SynthSpec spec = testing::small_spec();
  spec.unseen = 2;
  const Corpus c = synth_corpus(spec);
  TrainConfig t;
  t.embedding.dim = 64;
  t.clusters = 2;
  const Pipeline p = Pipeline::train(c, t);
  for (DomainId only = 1; only <= 4; ++only) {
    for (const DomainDataset& u : c.unseen) {
      const EvalReport r =
          evaluate(p, u.test, AccessPolicy({only}, 4), std::nullopt, config_with(3, 256, 64));
      // Each expert keeps (1 - mix) of the base mass, which bounds the
      // damage; at this scale the worst case measured is about 1.32.
      EXPECT_LE(r.normalized, 1.0 / (1.0 - t.ngram.mix)) << only << " on " << u.id;
      EXPECT_LE(r.normalized, 1.35) << only << " on " << u.id;
    }
  }
}

}  // namespace
}  // namespace ifcmoe
