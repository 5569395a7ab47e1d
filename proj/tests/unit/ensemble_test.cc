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


#include "ifcmoe/ensemble.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ifcmoe/error.h"
#include "ifcmoe/random.h"
#include "test_support.h"

namespace ifcmoe {
namespace {

NextTokenDist delta(std::size_t v, std::size_t at) {
  NextTokenDist d;
  d.probs.assign(v, 0.0);
  d.probs[at] = 1.0;
  return d;
}

TEST(PosteriorTest, UniformStart) {
  const std::vector<DomainId> three{4, 1, 9};
  const PosteriorWeights w = init_weights(three);
  EXPECT_EQ(w.expert_ids, three);
  for (double x : w.weights) EXPECT_DOUBLE_EQ(x, 1.0 / 3.0);
  const std::vector<DomainId> one{2};
  EXPECT_EQ(init_weights(one).weights, std::vector<double>{1.0});
}

TEST(PosteriorTest, MatchesDirectArithmetic) {
  PosteriorWeights w = init_weights(std::vector<DomainId>{1, 2});
  update_posterior(w, std::vector<double>{-1.0, -2.0});
  const double a = std::exp(-1.0);
  const double b = std::exp(-2.0);
  EXPECT_NEAR(w.weights[0], a / (a + b), 1e-15);
  EXPECT_NEAR(w.weights[1], b / (a + b), 1e-15);
  EXPECT_NEAR(w.weights[0], 0.7311, 1e-4);
  EXPECT_NEAR(w.weights[1], 0.2689, 1e-4);
}

TEST(PosteriorTest, EvidenceAccumulatesAcrossSteps) {
  Rng rng(1);
  PosteriorWeights w = init_weights(std::vector<DomainId>{1, 2, 3});
  std::vector<double> total(3, 0.0);
  for (int step = 0; step < 40; ++step) {
    std::vector<double> lp(3);
    for (std::size_t j = 0; j < 3; ++j) {
      lp[j] = std::log(0.01 + rng.uniform());
      total[j] += lp[j];
    }
    update_posterior(w, lp);
  }
  double z = 0.0;
  for (double t : total) z += std::exp(t);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(w.weights[j], std::exp(total[j]) / z, 1e-12);
}

TEST(PosteriorTest, IdenticalEvidenceStaysUniform) {
  PosteriorWeights w = init_weights(std::vector<DomainId>{1, 2, 3, 4});
  for (int step = 0; step < 1000; ++step) {
    const double lp = -0.001 * step;
    update_posterior(w, std::vector<double>(4, lp));
  }
  for (double x : w.weights) EXPECT_EQ(x, 0.25);
}

TEST(PosteriorTest, ConsistentWinnerTakesAll) {
  PosteriorWeights w = init_weights(std::vector<DomainId>{1, 2});
  double last = 0.5;
  for (int step = 0; step < 200; ++step) {
    update_posterior(w, std::vector<double>{-2.0, -2.1});
    EXPECT_GE(w.weights[0], last);
    last = w.weights[0];
  }
  EXPECT_GT(w.weights[0], 1.0 - 1e-8);
}

TEST(PosteriorTest, ShiftInvariance) {
  Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 1 + rng.index(6);
    std::vector<DomainId> ids(k);
    for (std::size_t j = 0; j < k; ++j) ids[j] = static_cast<DomainId>(j + 1);
    PosteriorWeights a = init_weights(ids);
    PosteriorWeights b = init_weights(ids);
    for (int step = 0; step < 10; ++step) {
      std::vector<double> lp(k);
      for (double& x : lp) x = -20.0 * rng.uniform();
      std::vector<double> shifted = lp;
      const double c = -30.0 * rng.uniform();
      for (double& x : shifted) x += c;
      update_posterior(a, lp);
      update_posterior(b, shifted);
    }
    const auto amax = std::max_element(a.weights.begin(), a.weights.end()) - a.weights.begin();
    const auto bmax = std::max_element(b.weights.begin(), b.weights.end()) - b.weights.begin();
    ASSERT_EQ(amax, bmax);
    for (std::size_t j = 0; j < k; ++j) ASSERT_NEAR(a.weights[j], b.weights[j], 1e-12);
  }
}

TEST(PosteriorTest, RejectsNonFiniteOrMismatchedInput) {
  PosteriorWeights w = init_weights(std::vector<DomainId>{1, 2});
  EXPECT_THROW(update_posterior(w, std::vector<double>{-1.0, std::nan("")}), DataError);
  EXPECT_THROW(
      update_posterior(w, std::vector<double>{-1.0, -std::numeric_limits<double>::infinity()}),
      DataError);
  EXPECT_THROW(update_posterior(w, std::vector<double>{-1.0}), DataError);
}

TEST(PosteriorTest, Deterministic) {
  const PosteriorWeights w = init_weights(std::vector<DomainId>{1, 2, 3});
  const std::vector<double> lp{-1.5, -0.25, -3.0};
  EXPECT_EQ(updated_posterior(w, lp), updated_posterior(w, lp));
}

TEST(SoftmaxTest, StableForLargeMagnitudes) {
  const std::vector<double> x{-1000.0, -1001.0};
  EXPECT_NEAR(log_sum_exp(x), -1000.0 + std::log1p(std::exp(-1.0)), 1e-12);
  std::vector<double> out(2);
  softmax(x, out);
  EXPECT_NEAR(out[0], 0.7310585786300049, 1e-15);
  const std::vector<double> big{800.0, 800.0};
  softmax(big, out);
  EXPECT_EQ(out[0], 0.5);
}

TEST(SoftmaxTest, ShiftInvarianceProperty) {
  Rng rng(3);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t k = 1 + rng.index(8);
    std::vector<double> x(k);
    for (double& v : x) v = 100.0 * (rng.uniform() - 0.5);
    std::vector<double> y = x;
    const double c = 1000.0 * (rng.uniform() - 0.5);
    for (double& v : y) v += c;
    std::vector<double> px(k);
    std::vector<double> py(k);
    softmax(x, px);
    softmax(y, py);
    ASSERT_EQ(std::max_element(px.begin(), px.end()) - px.begin(),
              std::max_element(py.begin(), py.end()) - py.begin());
    for (std::size_t j = 0; j < k; ++j) ASSERT_NEAR(px[j], py[j], 1e-12);
  }
}

TEST(MixTest, SingleExpertIsIdentity) {
  Rng rng(4);
  const std::vector<NextTokenDist> d{{testing::random_dist(rng, 50)}};
  const PosteriorWeights w = init_weights(std::vector<DomainId>{7});
  EXPECT_EQ(mix_outputs(d, w), d[0]);
}

TEST(MixTest, EqualDistributionsAreFixed) {
  Rng rng(5);
  const NextTokenDist p{testing::random_dist(rng, 40)};
  const std::vector<NextTokenDist> d{p, p, p};
  PosteriorWeights w = init_weights(std::vector<DomainId>{1, 2, 3});
  update_posterior(w, std::vector<double>{-0.1, -3.0, -1.7});
  const NextTokenDist out = mix_outputs(d, w);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(out.probs[i], p.probs[i], 1e-16);
}

TEST(MixTest, HalfAndHalfOfTwoPointMasses) {
  const std::vector<NextTokenDist> d{delta(5, 1), delta(5, 3)};
  const PosteriorWeights w = init_weights(std::vector<DomainId>{1, 2});
  EXPECT_EQ(mix_outputs(d, w).probs, (std::vector<double>{0, 0.5, 0, 0.5, 0}));
  const std::vector<double> p1{0.2, 0.6};
  EXPECT_DOUBLE_EQ(mix_token(p1, w), 0.4);
}

TEST(MixTest, SizeMismatchIsRejected) {
  const std::vector<NextTokenDist> d{delta(5, 1), delta(4, 3)};
  EXPECT_THROW(mix_outputs(d, init_weights(std::vector<DomainId>{1, 2})), DataError);
  const std::vector<NextTokenDist> one{delta(5, 1)};
  EXPECT_THROW(mix_outputs(one, init_weights(std::vector<DomainId>{1, 2})), DataError);
}

// Random walks over expert outputs and posterior updates; every mixed
// distribution must stay normalised.
TEST(MixTest, FuzzStaysNormalised) {
  Rng rng(6);
  std::size_t steps = 0;
  double worst = 0.0;
  while (steps < 100000) {
    const std::size_t k = 1 + rng.index(5);
    const std::size_t v = 2 + rng.index(60);
    std::vector<DomainId> ids(k);
    for (std::size_t j = 0; j < k; ++j) ids[j] = static_cast<DomainId>(j + 1);
    PosteriorWeights w = init_weights(ids);
    for (int t = 0; t < 50 && steps < 100000; ++t, ++steps) {
      std::vector<NextTokenDist> d;
      for (std::size_t j = 0; j < k; ++j) d.push_back({testing::random_dist(rng, v)});
      const NextTokenDist out = mix_outputs(d, w);
      for (double p : out.probs) ASSERT_GE(p, 0.0);
      worst = std::max(worst, std::abs(testing::sum(out.probs) - 1.0));
      const auto tok = rng.index(v);
      std::vector<double> lp(k);
      for (std::size_t j = 0; j < k; ++j) lp[j] = std::log(d[j].probs[tok]);
      update_posterior(w, lp);
    }
  }
  EXPECT_LE(worst, 1e-9);
}

}  // namespace
}  // namespace ifcmoe
