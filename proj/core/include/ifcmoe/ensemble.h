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

#ifndef IFCMOE_ENSEMBLE_H_
#define IFCMOE_ENSEMBLE_H_

#include <span>
#include <vector>

#include "ifcmoe/ngram.h"
#include "ifcmoe/types.h"

namespace ifcmoe {

// Posterior over the selected experts under a uniform prior.
struct PosteriorWeights {
  std::vector<DomainId> expert_ids;
  // Accumulated log P(x_<t | expert).
  std::vector<double> log_evidence;
  // softmax(log_evidence); the uniform prior cancels.
  std::vector<double> weights;

  std::size_t size() const { return expert_ids.size(); }
  bool operator==(const PosteriorWeights&) const = default;
};

// log(sum(exp(x))) with max subtraction.
double log_sum_exp(std::span<const double> x);
void softmax(std::span<const double> logits, std::span<double> out);

PosteriorWeights init_weights(std::span<const DomainId> expert_ids);

// Adds one log-probability per expert to the evidence and renormalises.
// Throws DataError on a non-finite input.
void update_posterior(PosteriorWeights& w, std::span<const double> token_logprobs);
PosteriorWeights updated_posterior(const PosteriorWeights& w,
                                   std::span<const double> token_logprobs);

// sum_j w_j * dists[j], accumulated in expert order.
NextTokenDist mix_outputs(std::span<const NextTokenDist> dists, const PosteriorWeights& w);
void mix_outputs(std::span<const NextTokenDist> dists, const PosteriorWeights& w,
                 std::span<double> out);
// Same sum for a single token.
double mix_token(std::span<const double> expert_probs, const PosteriorWeights& w);

}  // namespace ifcmoe

#endif  // IFCMOE_ENSEMBLE_H_
