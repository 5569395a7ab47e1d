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


#include "ifcmoe/verify.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <vector>

#include "ifcmoe/error.h"
#include "ifcmoe/random.h"
#include "test_support.h"

namespace ifcmoe {
namespace {

using ::ifcmoe::testing::small_corpus;

TrainConfig small_train() {
  TrainConfig t;
  t.embedding.dim = 64;
  t.clusters = 2;
  return t;
}

EngineConfig small_engine() {
  EngineConfig e;
  e.gate.k = 2;
  e.gate.r = 64;
  e.gate.c = 32;
  e.gate.s = 2;
  return e;
}

std::vector<NiQuery> queries(const Corpus& c, std::size_t per_domain, std::size_t length) {
  std::vector<NiQuery> out;
  for (const DomainDataset& d : c.domains) {
    for (std::size_t i = 0; i < per_domain; ++i) {
      const auto begin = d.test.begin() + static_cast<std::ptrdiff_t>(i * length);
      out.push_back({TokenSeq(begin, begin + static_cast<std::ptrdiff_t>(length)), d.id});
    }
  }
  return out;
}

TEST(PerturbTest, ShufflePreservesTheMultiset) {
  const Corpus& c = small_corpus();
  const Corpus p = perturb(c, {{3}, PerturbationKind::kShuffle, 5});
  TokenSeq before = c.domains[2].train;
  TokenSeq after = p.domains[2].train;
  EXPECT_NE(before, after);
  std::sort(before.begin(), before.end());
  std::sort(after.begin(), after.end());
  EXPECT_EQ(before, after);
  EXPECT_EQ(p.domains[2].test, c.domains[2].test);
  for (DomainId d : {1, 2, 4}) EXPECT_EQ(p.domains[d - 1], c.domains[d - 1]);
  EXPECT_EQ(p.vocabulary, c.vocabulary);
  EXPECT_EQ(p.public_set, c.public_set);
}

TEST(PerturbTest, EmptyTargetsAreTheIdentity) {
  const Corpus& c = small_corpus();
  for (PerturbationKind k : kAllPerturbations) EXPECT_EQ(perturb(c, {{}, k, 1}), c);
}

TEST(PerturbTest, KindsChangeTheData) {
  const Corpus& c = small_corpus();
  const auto& train = c.domains[1].train;
  const Corpus fresh = perturb(c, {{2}, PerturbationKind::kFreshSynthetic, 1});
  EXPECT_NE(fresh.domains[1].sample_count(), c.domains[1].sample_count());
  const Corpus half = perturb(c, {{2}, PerturbationKind::kTruncateHalf, 1});
  EXPECT_EQ(half.domains[1].train.size(), (train.size() + 1) / 2);
  const Corpus sub = perturb(c, {{2}, PerturbationKind::kTokenSubstitute, 1});
  ASSERT_EQ(sub.domains[1].train.size(), train.size());
  std::size_t changed = 0;
  for (std::size_t i = 0; i < train.size(); ++i) changed += sub.domains[1].train[i] != train[i];
  EXPECT_GT(changed, train.size() / 10);
  EXPECT_LT(changed, train.size() / 4);
  for (const Corpus* p : {&fresh, &half, &sub}) {
    for (TokenId t : p->domains[1].train) ASSERT_LT(t, c.vocabulary.size());
  }
}

TEST(PerturbTest, GuardsAndNames) {
  const Corpus& c = small_corpus();
  const AccessPolicy policy({1, 2}, 4);
  EXPECT_THROW(perturb(c, {{2}, PerturbationKind::kShuffle, 1}, &policy), PolicyViolation);
  EXPECT_THROW(perturb(c, {{9}, PerturbationKind::kShuffle, 1}), ConfigError);
  for (PerturbationKind k : kAllPerturbations) EXPECT_EQ(parse_perturbation(to_string(k)), k);
  EXPECT_THROW(parse_perturbation("rot13"), ConfigError);
}

TEST(VerifyTest, PassesForRandomPoliciesAndIsDeterministic) {
  const Corpus& c = small_corpus();
  Rng rng(3);
  std::vector<AccessPolicy> policies;
  for (int i = 0; i < 3; ++i) policies.push_back(testing::random_policy(rng, 4));
  policies.push_back(AccessPolicy({1, 3}, 4));
  const auto q = queries(c, 1, 200);
  const NiReport a = verify_ni(c, policies, q, small_train(), small_engine());
  EXPECT_TRUE(a.pass) << a.to_text();
  EXPECT_GT(a.positions, 0u);
  const NiReport b = verify_ni(c, policies, q, small_train(), small_engine());
  EXPECT_EQ(a.to_text(), b.to_text());
}

TEST(VerifyTest, FullAccessIsTriviallySkipped) {
  const Corpus& c = small_corpus();
  const std::vector<AccessPolicy> policies{AccessPolicy::all(4)};
  const NiReport r = verify_ni(c, policies, queries(c, 1, 100), small_train(), small_engine());
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.skipped_policies, 1u);
  EXPECT_EQ(r.comparisons, 0u);
}

TEST(VerifyTest, RefusesNonStrictAndEmptyQueries) {
  const Corpus& c = small_corpus();
  const std::vector<AccessPolicy> policies{AccessPolicy({1}, 4)};
  EngineConfig e = small_engine();
  e.strict = false;
  EXPECT_THROW(verify_ni(c, policies, queries(c, 1, 100), small_train(), e), ConfigError);
  EXPECT_THROW(verify_ni(c, policies, {}, small_train(), small_engine()), ConfigError);
}

// Perturbing an accessible domain must be visible; otherwise the oracle
// could pass vacuously.
TEST(VerifyTest, AccessiblePerturbationDiverges) {
  const Corpus& c = small_corpus();
  const AccessPolicy policy({1, 2}, 4);
  const Pipeline a = Pipeline::train(c, small_train());
  const Pipeline b =
      Pipeline::train(perturb(c, {{2}, PerturbationKind::kTokenSubstitute, 4}), small_train());
  const std::vector<GateBackend> backends{GateBackend::kKnown, GateBackend::kPairwise};
  std::vector<NiQuery> q{{TokenSeq(c.domains[1].test.begin(), c.domains[1].test.begin() + 200),
                          DomainId{2}}};
  const NiReport r = compare_pipelines(a, b, policy, q, small_engine(), backends, "control");
  EXPECT_FALSE(r.pass);
  ASSERT_TRUE(r.first.has_value());
  EXPECT_EQ(r.first->perturbation, "control");
}

// Domain sizes vary widely and lambda is large, so the size term decides
// close rankings. Counting inaccessible domains in the denominator leaks
// their (perturbed) sizes; the accessible denominator does not.
TEST(VerifyTest, SizeDenominatorDecidesNonInterference) {
  SynthSpec spec = testing::small_spec();
  spec.domains = 6;
  spec.skew = 0.3;
  spec.tokens_per_domain = {2000, 3000, 5000, 8000, 12000, 20000};
  const Corpus c = synth_corpus(spec);
  Rng rng(8);
  std::vector<AccessPolicy> policies;
  for (int i = 0; i < 6; ++i) policies.push_back(testing::random_policy(rng, 6));
  const auto q = queries(c, 1, 300);
  NiOptions o;
  o.kinds = {PerturbationKind::kFreshSynthetic};
  o.backends = {GateBackend::kPairwise};
  EngineConfig e = small_engine();
  e.gate.k = 1;
  e.gate.lambda = 1.0;
  e.size_denominator = SizeDenominator::kAccessible;
  EXPECT_TRUE(verify_ni(c, policies, q, small_train(), e, o).pass);
  e.size_denominator = SizeDenominator::kAll;
  const NiReport leak = verify_ni(c, policies, q, small_train(), e, o);
  EXPECT_FALSE(leak.pass);
  ASSERT_TRUE(leak.first.has_value());
  EXPECT_EQ(leak.first->component, "gate-selection");
}

}  // namespace
}  // namespace ifcmoe
