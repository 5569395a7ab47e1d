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

#ifndef IFCMOE_ABLATION_H_
#define IFCMOE_ABLATION_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <string_view>
#include <vector>

#include "ifcmoe/corpus.h"
#include "ifcmoe/engine.h"
#include "ifcmoe/pipeline.h"

namespace ifcmoe {

enum class AblationKnob { kK, kLambda, kC };

std::string_view to_string(AblationKnob knob);
AblationKnob parse_knob(std::string_view name);

struct AblationOptions {
  AblationKnob knob = AblationKnob::kK;
  std::vector<double> values;
  // Accessible-domain counts to sample policies for; empty means 1..m.
  // Ignored for kC, which always uses every domain.
  std::vector<std::size_t> bins;
  std::size_t policies_per_bin = 3;
  // Monte-Carlo samples for kC.
  std::size_t samples = 200;
  EngineConfig engine;
  std::uint64_t seed = 23;
};

struct AblationRow {
  double value = 0.0;
  std::size_t accessible = 0;
  std::size_t policies = 0;
  std::size_t evaluations = 0;
  // Geometric mean of normalized perplexity over the seen-domain test
  // splits (kK, kLambda). NaN for kC.
  double normalized = 0.0;
  // Fraction of samples whose top-1 gate is the true domain (kC only,
  // otherwise NaN).
  double identification = 0.0;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  // Per bin, the median over (policy, test domain) pairs of the value that
  // gave that pair its lowest perplexity (ties: smaller value). Empty for
  // kC.
  std::map<std::size_t, double> median_best;
};

// Policies are drawn once per bin and shared by every value, so rows of
// one bin differ only in the knob.
AblationResult ablate(const Pipeline& pipeline, const Corpus& corpus,
                      const AblationOptions& options);

// Value with the lowest normalized perplexity in each bin (ties: smaller
// value).
std::map<std::size_t, double> best_per_bin(const std::vector<AblationRow>& rows);
// Value with the lowest geometric-mean normalized perplexity over all bins.
double best_overall(const std::vector<AblationRow>& rows);

}  // namespace ifcmoe

#endif  // IFCMOE_ABLATION_H_
