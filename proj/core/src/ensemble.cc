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

#include <algorithm>
#include <cmath>

#include "ifcmoe/error.h"

namespace ifcmoe {

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) throw DataError("log_sum_exp of an empty set");
  const double hi = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(hi)) return hi;
  double sum = 0.0;
  for (double v : x) sum += std::exp(v - hi);
  return hi + std::log(sum);
}

void softmax(std::span<const double> logits, std::span<double> out) {
  if (logits.size() != out.size() || logits.empty()) {
    throw DataError("softmax size mismatch");
  }
  const double hi = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - hi);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
}

PosteriorWeights init_weights(std::span<const DomainId> expert_ids) {
  if (expert_ids.empty()) throw ConfigError("ensemble needs at least one expert");
  PosteriorWeights w;
  w.expert_ids.assign(expert_ids.begin(), expert_ids.end());
  w.log_evidence.assign(expert_ids.size(), 0.0);
  w.weights.assign(expert_ids.size(), 1.0 / static_cast<double>(expert_ids.size()));
  return w;
}

void update_posterior(PosteriorWeights& w, std::span<const double> token_logprobs) {
  if (token_logprobs.size() != w.size()) {
    throw DataError("one log-probability per expert is required");
  }
  for (double lp : token_logprobs) {
    if (!std::isfinite(lp)) throw DataError("non-finite expert log-probability");
  }
  for (std::size_t j = 0; j < w.size(); ++j) w.log_evidence[j] += token_logprobs[j];
  softmax(w.log_evidence, w.weights);
}

PosteriorWeights updated_posterior(const PosteriorWeights& w,
                                   std::span<const double> token_logprobs) {
  PosteriorWeights out = w;
  update_posterior(out, token_logprobs);
  return out;
}

void mix_outputs(std::span<const NextTokenDist> dists, const PosteriorWeights& w,
                 std::span<double> out) {
  if (dists.size() != w.size() || dists.empty()) {
    throw DataError("one distribution per weighted expert is required");
  }
  for (const auto& d : dists) {
    if (d.size() != out.size()) throw DataError("distribution dimension mismatch");
  }
  for (std::size_t v = 0; v < out.size(); ++v) {
    double acc = w.weights[0] * dists[0].probs[v];
    for (std::size_t j = 1; j < dists.size(); ++j) acc += w.weights[j] * dists[j].probs[v];
    out[v] = acc;
  }
}

NextTokenDist mix_outputs(std::span<const NextTokenDist> dists, const PosteriorWeights& w) {
  if (dists.empty()) throw DataError("one distribution per weighted expert is required");
  NextTokenDist out;
  out.probs.resize(dists[0].size());
  mix_outputs(dists, w, out.probs);
  return out;
}

double mix_token(std::span<const double> expert_probs, const PosteriorWeights& w) {
  if (expert_probs.size() != w.size() || expert_probs.empty()) {
    throw DataError("one probability per weighted expert is required");
  }
  double acc = w.weights[0] * expert_probs[0];
  for (std::size_t j = 1; j < expert_probs.size(); ++j) acc += w.weights[j] * expert_probs[j];
  return acc;
}

}  // namespace ifcmoe
