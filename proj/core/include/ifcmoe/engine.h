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

#ifndef IFCMOE_ENGINE_H_
#define IFCMOE_ENGINE_H_

#include <cstddef>
#include <cstdint>
#include <future>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ifcmoe/ensemble.h"
#include "ifcmoe/gating.h"
#include "ifcmoe/pipeline.h"
#include "ifcmoe/policy.h"

namespace ifcmoe {

enum class GateBackend { kKnown, kPairwise, kCluster };

std::string_view to_string(GateBackend backend);
// "known", "pairwise" or "cluster"; throws ConfigError otherwise.
GateBackend parse_backend(std::string_view name);

// How far back the posterior evidence reaches.
enum class EvidenceWindow {
  // Reset whenever a new expert set takes over.
  kPerGate,
  // Every token since the start of the session.
  kSession,
};

enum class ClusterSource { kPerPolicy, kOffline };

std::string_view to_string(ClusterSource source);
ClusterSource parse_cluster_source(std::string_view name);

struct EngineConfig {
  GateConfig gate;
  // Backend used when no label is given (kKnown only applies with a label).
  GateBackend backend = GateBackend::kPairwise;
  // Strict non-interference: labels must be accessible, cluster centroids
  // are means over accessible members only, and the offline partition is
  // refused. Non-strict selects clusters by their stored centroids.
  bool strict = true;
  // Where gate-cluster's partition comes from: k-means over the policy's
  // accessible domains, or the all-domain partition built at training
  // time (non-strict only; its s is the training cluster count).
  ClusterSource cluster_source = ClusterSource::kPerPolicy;
  SizeDenominator size_denominator = SizeDenominator::kAccessible;
  EvidenceWindow evidence = EvidenceWindow::kPerGate;
  // With a label outside the policy, gate from the sample text instead of
  // raising PolicyViolation.
  bool label_fallback = false;
  // Compute the next window's gate on a worker thread when its sample text
  // is already known.
  bool overlap_regating = true;
  // Run the selected experts' forward passes concurrently.
  bool parallel_experts = false;

  void validate(std::size_t m) const;
};

// One expert-set selection. The set scores positions [active_from, next
// event's active_from).
struct GateEvent {
  std::size_t window = 0;
  std::size_t sample_begin = 0;
  std::size_t sample_end = 0;
  std::size_t active_from = 0;
  std::vector<DomainId> experts;

  bool operator==(const GateEvent&) const = default;
};

struct TraceRecord {
  std::size_t position = 0;
  std::vector<DomainId> experts;
  // Posterior used for this position (before observing the token).
  std::vector<double> weights;
  TokenId token = 0;
  double log_prob = 0.0;

  bool operator==(const TraceRecord&) const = default;
};

// Incremental inference over one query. Position p is the index of the
// next token to predict, conditioned on the p tokens observed so far.
//
// Without a label, window j samples tokens [j*r, j*r + c) and its experts
// score positions [j*r + c, (j+1)*r + c); positions below c are never
// scored. With a label, one gate-known selection scores every position.
class Session {
 public:
  Session(const Pipeline& pipeline, AccessPolicy policy, std::optional<DomainId> label,
          EngineConfig config);
  // Uses a precomputed partition for gate-cluster instead of deriving one.
  Session(const Pipeline& pipeline, AccessPolicy policy, std::optional<DomainId> label,
          EngineConfig config, ClusterPartition partition);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  // Declares the full input in advance so re-gating can run ahead.
  void set_lookahead(TokenView input);

  std::size_t position() const { return tokens_.size(); }
  bool can_predict();
  bool known_mode() const { return known_; }
  std::size_t first_scored_position() const;

  const std::vector<DomainId>& experts();
  const PosteriorWeights& weights();

  void predict(std::span<double> out);
  NextTokenDist predict();
  double token_prob(TokenId token);
  // Scores `token` at the current position when possible (NaN otherwise),
  // updates the posterior and advances.
  double observe(TokenId token);

  const std::vector<GateEvent>& gate_events() const { return events_; }
  const std::vector<TraceRecord>& trace() const { return trace_; }
  void set_record_trace(bool on) { record_trace_ = on; }
  const TokenSeq& tokens() const { return tokens_; }

 private:
  void init(std::optional<DomainId> label);
  // Expert-set window for position p, or -1 when p cannot be scored.
  long window_for(std::size_t p) const;
  bool sync();
  std::vector<DomainId> gate_window(std::size_t window) const;
  TokenView sample_for(std::size_t window) const;
  void maybe_prefetch(std::size_t window);
  void activate(std::size_t window, std::vector<DomainId> experts);
  void expert_probs(TokenId token, std::vector<double>& out) const;

  const Pipeline& pipeline_;
  AccessPolicy policy_;
  EngineConfig config_;
  bool known_ = false;
  SizePrior prior_;
  std::optional<ClusterPartition> partition_;
  CentroidMode centroid_mode_ = CentroidMode::kAccessibleMembers;

  TokenSeq tokens_;
  TokenSeq lookahead_;
  long window_ = -1;
  std::vector<const Expert*> active_;
  PosteriorWeights weights_;
  std::vector<GateEvent> events_;
  std::vector<TraceRecord> trace_;
  bool record_trace_ = true;

  std::optional<std::size_t> pending_window_;
  std::future<std::vector<DomainId>> pending_;

  std::vector<NextTokenDist> scratch_;
  std::vector<double> probs_;
};

struct InferenceResult {
  std::size_t first_position = 0;
  // outputs[i] is the distribution for position first_position + i.
  std::vector<NextTokenDist> outputs;
  std::vector<TraceRecord> trace;
  std::vector<GateEvent> gate_events;
};

InferenceResult infer_known(const Pipeline& pipeline, TokenView input,
                            const AccessPolicy& policy, DomainId label,
                            const EngineConfig& config);
// Throws DataError if the input is not longer than the sample text.
InferenceResult infer_unknown(const Pipeline& pipeline, TokenView input,
                              const AccessPolicy& policy, const EngineConfig& config);
InferenceResult infer(const Pipeline& pipeline, TokenView input, const AccessPolicy& policy,
                      std::optional<DomainId> label, const EngineConfig& config,
                      bool keep_outputs = true);

enum class Decoding { kGreedy, kSample };

struct DecodeOptions {
  Decoding mode = Decoding::kGreedy;
  // Required for kSample.
  std::optional<std::uint64_t> seed;
};

struct Generation {
  TokenSeq tokens;
  std::vector<TraceRecord> trace;
  std::vector<GateEvent> gate_events;
};

Generation generate(const Pipeline& pipeline, TokenView prompt, const AccessPolicy& policy,
                    std::optional<DomainId> label, std::size_t length,
                    const DecodeOptions& decode, const EngineConfig& config);

struct EvalReport {
  double perplexity = 0.0;
  double base_perplexity = 0.0;
  // perplexity / base_perplexity over the same positions.
  double normalized = 0.0;
  std::size_t scored = 0;
  std::size_t first_position = 0;
  std::vector<GateEvent> selections;
};

// Scores every position the session can score at or after `min_position`.
EvalReport evaluate(const Pipeline& pipeline, TokenView text, const AccessPolicy& policy,
                    std::optional<DomainId> label, const EngineConfig& config,
                    std::size_t min_position = 0);

}  // namespace ifcmoe

#endif  // IFCMOE_ENGINE_H_
