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

#ifndef IFCMOE_VERIFY_H_
#define IFCMOE_VERIFY_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ifcmoe/corpus.h"
#include "ifcmoe/engine.h"
#include "ifcmoe/pipeline.h"
#include "ifcmoe/policy.h"

namespace ifcmoe {

enum class PerturbationKind {
  // Replace the text with fresh random tokens of a different length.
  kFreshSynthetic,
  kShuffle,
  kTruncateHalf,
  // Overwrite a fifth of the tokens with random ones.
  kTokenSubstitute,
};

inline constexpr PerturbationKind kAllPerturbations[] = {
    PerturbationKind::kFreshSynthetic, PerturbationKind::kShuffle,
    PerturbationKind::kTruncateHalf, PerturbationKind::kTokenSubstitute};

std::string_view to_string(PerturbationKind kind);
PerturbationKind parse_perturbation(std::string_view name);

struct Perturbation {
  std::vector<DomainId> targets;
  PerturbationKind kind = PerturbationKind::kShuffle;
  std::uint64_t seed = 0;
};

// Rewrites the train and held-out splits of every target domain. The
// vocabulary, public set, test splits and all other domains are left
// untouched. With `guard`, a target inside the policy raises
// PolicyViolation.
Corpus perturb(const Corpus& corpus, const Perturbation& p,
               const AccessPolicy* guard = nullptr);

struct NiQuery {
  TokenSeq tokens;
  // Used by the known backend; ignored otherwise.
  std::optional<DomainId> label;
};

struct Divergence {
  std::string policy;
  std::string perturbation;
  GateBackend backend = GateBackend::kPairwise;
  std::size_t query = 0;
  std::size_t position = 0;
  // "gate-selection", "weights" or "distribution".
  std::string component;
  std::string detail;
};

struct NiReport {
  bool pass = true;
  std::size_t comparisons = 0;
  std::size_t positions = 0;
  std::size_t skipped_policies = 0;
  std::optional<Divergence> first;

  // Structured report lines.
  std::string to_text() const;
};

struct NiOptions {
  std::vector<PerturbationKind> kinds{std::begin(kAllPerturbations),
                                      std::end(kAllPerturbations)};
  std::vector<GateBackend> backends{GateBackend::kKnown, GateBackend::kPairwise,
                                    GateBackend::kCluster};
  std::uint64_t seed = 0;
  bool stop_at_first = true;
};

// Trains the pipeline on `corpus` and on a perturbed copy for every
// (policy, kind), perturbing all inaccessible domains, and requires every
// per-position output to be bit-identical. Refuses a non-strict config.
// The known backend falls back to sample-text gating for labels outside
// the policy.
NiReport verify_ni(const Corpus& corpus, std::span<const AccessPolicy> policies,
                   std::span<const NiQuery> queries, const TrainConfig& train,
                   const EngineConfig& engine, const NiOptions& options = {});

// Compares every query under two already-trained pipelines; no
// precondition on how they differ. Used for negative controls.
NiReport compare_pipelines(const Pipeline& a, const Pipeline& b, const AccessPolicy& policy,
                           std::span<const NiQuery> queries, const EngineConfig& engine,
                           std::span<const GateBackend> backends,
                           std::string_view perturbation_name = "", bool stop_at_first = true);

}  // namespace ifcmoe

#endif  // IFCMOE_VERIFY_H_
