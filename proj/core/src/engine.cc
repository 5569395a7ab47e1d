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

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ifcmoe/error.h"
#include "ifcmoe/random.h"

namespace ifcmoe {

std::string_view to_string(GateBackend backend) {
  switch (backend) {
    case GateBackend::kKnown:
      return "known";
    case GateBackend::kPairwise:
      return "pairwise";
    case GateBackend::kCluster:
      return "cluster";
  }
  return "?";
}

GateBackend parse_backend(std::string_view name) {
  if (name == "known") return GateBackend::kKnown;
  if (name == "pairwise") return GateBackend::kPairwise;
  if (name == "cluster") return GateBackend::kCluster;
  throw ConfigError("unknown gating backend '" + std::string(name) +
                    "' (expected known, pairwise or cluster)");
}

std::string_view to_string(ClusterSource source) {
  return source == ClusterSource::kOffline ? "offline" : "per-policy";
}

ClusterSource parse_cluster_source(std::string_view name) {
  if (name == "per-policy") return ClusterSource::kPerPolicy;
  if (name == "offline") return ClusterSource::kOffline;
  throw ConfigError("unknown cluster source '" + std::string(name) +
                    "' (expected per-policy or offline)");
}

void EngineConfig::validate(std::size_t m) const {
  gate.validate(m);
  if (strict && cluster_source == ClusterSource::kOffline) {
    throw ConfigError(
        "the offline cluster partition is computed over every domain, including "
        "inaccessible ones; strict mode needs cluster_source=per-policy (or run with "
        "strict_ni=false)");
  }
}

Session::Session(const Pipeline& pipeline, AccessPolicy policy, std::optional<DomainId> label,
                 EngineConfig config)
    : pipeline_(pipeline), policy_(std::move(policy)), config_(config) {
  init(label);
}

Session::Session(const Pipeline& pipeline, AccessPolicy policy, std::optional<DomainId> label,
                 EngineConfig config, ClusterPartition partition)
    : pipeline_(pipeline),
      policy_(std::move(policy)),
      config_(config),
      partition_(std::move(partition)) {
  init(label);
}

Session::~Session() {
  if (pending_.valid()) pending_.wait();
}

void Session::init(std::optional<DomainId> label) {
  config_.validate(pipeline_.m());
  if (policy_.m() != pipeline_.m()) {
    throw ConfigError("access policy was built for a different number of domains");
  }
  if (label && policy_.contains(*label)) {
    known_ = true;
    activate(0, gate_known(pipeline_.matrix(), policy_, *label, config_.gate.k));
    return;
  }
  if (label && !config_.label_fallback) {
    throw PolicyViolation("domain label " + std::to_string(*label) +
                          " is outside the access policy");
  }
  if (config_.backend == GateBackend::kKnown && !label) {
    throw ConfigError("gate-known needs a domain label");
  }
  prior_ = make_size_prior(pipeline_.stats(), policy_, config_.size_denominator,
                           config_.gate.lambda);
  if (config_.backend == GateBackend::kCluster) {
    centroid_mode_ =
        config_.strict ? CentroidMode::kAccessibleMembers : CentroidMode::kAllMembers;
    if (!partition_) {
      if (config_.cluster_source == ClusterSource::kPerPolicy) {
        const std::size_t s = std::min(config_.gate.s, policy_.size());
        partition_ = compute_clusters(pipeline_.vectors(), policy_.ids(), s,
                                      pipeline_.config().cluster_seed,
                                      pipeline_.config().kmeans_iterations);
      } else {
        partition_ = pipeline_.partition();
      }
    }
  }
}

std::size_t Session::first_scored_position() const { return known_ ? 0 : config_.gate.c; }

long Session::window_for(std::size_t p) const {
  if (known_) return 0;
  if (p < config_.gate.c) return -1;
  return static_cast<long>((p - config_.gate.c) / config_.gate.r);
}

TokenView Session::sample_for(std::size_t window) const {
  const std::size_t begin = window * config_.gate.r;
  const std::size_t end = begin + config_.gate.c;
  if (end <= tokens_.size()) return TokenView(tokens_).subspan(begin, config_.gate.c);
  if (end <= lookahead_.size()) return TokenView(lookahead_).subspan(begin, config_.gate.c);
  throw DataError("sample text for window " + std::to_string(window) + " is not available");
}

namespace {

std::vector<DomainId> gate_sample(const Pipeline& pipeline, const AccessPolicy& policy,
                                  const EngineConfig& config, const SizePrior& prior,
                                  const ClusterPartition* partition, CentroidMode mode,
                                  TokenView sample) {
  const EmbeddingVector query = pipeline.embedder().vectorize(sample);
  if (config.backend == GateBackend::kCluster) {
    return gate_cluster(query, policy, config.gate.k, prior, pipeline.stats(), *partition,
                        pipeline.vectors(), mode);
  }
  return gate_pairwise(query, policy, config.gate.k, prior, pipeline.stats(),
                       pipeline.vectors());
}

}  // namespace

std::vector<DomainId> Session::gate_window(std::size_t window) const {
  return gate_sample(pipeline_, policy_, config_, prior_,
                     partition_ ? &*partition_ : nullptr, centroid_mode_, sample_for(window));
}

void Session::set_lookahead(TokenView input) {
  lookahead_.assign(input.begin(), input.end());
}

void Session::maybe_prefetch(std::size_t window) {
  if (known_ || !config_.overlap_regating || pending_.valid()) return;
  const std::size_t begin = window * config_.gate.r;
  const std::size_t end = begin + config_.gate.c;
  // Only worth it if the window will score something.
  if (end >= std::max(lookahead_.size(), tokens_.size())) return;
  TokenSeq sample(sample_for(window).begin(), sample_for(window).end());
  const ClusterPartition* partition = partition_ ? &*partition_ : nullptr;
  pending_window_ = window;
  pending_ = std::async(std::launch::async, [this, partition, sample = std::move(sample)] {
    return gate_sample(pipeline_, policy_, config_, prior_, partition, centroid_mode_, sample);
  });
}

void Session::activate(std::size_t window, std::vector<DomainId> experts) {
  GateEvent event;
  event.window = window;
  if (!known_) {
    event.sample_begin = window * config_.gate.r;
    event.sample_end = event.sample_begin + config_.gate.c;
  }
  event.active_from = tokens_.size();
  event.experts = experts;
  events_.push_back(event);

  active_.clear();
  for (DomainId id : experts) active_.push_back(&pipeline_.expert(id));
  scratch_.resize(active_.size());
  probs_.resize(active_.size());
  weights_ = init_weights(experts);
  if (config_.evidence == EvidenceWindow::kSession && !tokens_.empty()) {
    std::vector<double> logprobs(active_.size());
    for (std::size_t q = 0; q < tokens_.size(); ++q) {
      const TokenView history = TokenView(tokens_).first(q);
      for (std::size_t j = 0; j < active_.size(); ++j) {
        logprobs[j] = std::log(active_[j]->prob(history, tokens_[q]));
      }
      update_posterior(weights_, logprobs);
    }
  }
  window_ = static_cast<long>(window);
}

bool Session::sync() {
  const long w = window_for(tokens_.size());
  if (w < 0) return false;
  if (w != window_) {
    std::vector<DomainId> experts;
    if (pending_.valid() && pending_window_ == static_cast<std::size_t>(w)) {
      experts = pending_.get();
      pending_window_.reset();
    } else {
      if (pending_.valid()) pending_.wait();
      pending_ = {};
      pending_window_.reset();
      experts = gate_window(static_cast<std::size_t>(w));
    }
    activate(static_cast<std::size_t>(w), std::move(experts));
    maybe_prefetch(static_cast<std::size_t>(w) + 1);
  }
  return true;
}

bool Session::can_predict() { return sync(); }

const std::vector<DomainId>& Session::experts() {
  sync();
  return weights_.expert_ids;
}

const PosteriorWeights& Session::weights() {
  sync();
  return weights_;
}

void Session::expert_probs(TokenId token, std::vector<double>& out) const {
  out.resize(active_.size());
  for (std::size_t j = 0; j < active_.size(); ++j) out[j] = active_[j]->prob(tokens_, token);
}

void Session::predict(std::span<double> out) {
  if (!sync()) {
    throw DataError("position " + std::to_string(tokens_.size()) +
                    " cannot be scored before the sample text is complete");
  }
  const std::size_t v = pipeline_.vocab_size();
  for (auto& d : scratch_) d.probs.resize(v);
  if (config_.parallel_experts && active_.size() > 1) {
    std::vector<std::future<void>> jobs;
    for (std::size_t j = 1; j < active_.size(); ++j) {
      jobs.push_back(std::async(std::launch::async, [this, j] {
        active_[j]->next_token_dist(tokens_, scratch_[j].probs);
      }));
    }
    active_[0]->next_token_dist(tokens_, scratch_[0].probs);
    for (auto& job : jobs) job.get();
  } else {
    for (std::size_t j = 0; j < active_.size(); ++j) {
      active_[j]->next_token_dist(tokens_, scratch_[j].probs);
    }
  }
  mix_outputs(scratch_, weights_, out);
}

NextTokenDist Session::predict() {
  NextTokenDist d;
  d.probs.resize(pipeline_.vocab_size());
  predict(d.probs);
  return d;
}

double Session::token_prob(TokenId token) {
  if (!sync()) {
    throw DataError("position " + std::to_string(tokens_.size()) + " cannot be scored yet");
  }
  expert_probs(token, probs_);
  return mix_token(probs_, weights_);
}

double Session::observe(TokenId token) {
  double log_prob = std::numeric_limits<double>::quiet_NaN();
  if (sync()) {
    expert_probs(token, probs_);
    log_prob = std::log(mix_token(probs_, weights_));
    if (record_trace_) {
      trace_.push_back(
          {tokens_.size(), weights_.expert_ids, weights_.weights, token, log_prob});
    }
    std::vector<double> logprobs(probs_.size());
    for (std::size_t j = 0; j < probs_.size(); ++j) logprobs[j] = std::log(probs_[j]);
    update_posterior(weights_, logprobs);
  }
  tokens_.push_back(token);
  return log_prob;
}

InferenceResult infer(const Pipeline& pipeline, TokenView input, const AccessPolicy& policy,
                      std::optional<DomainId> label, const EngineConfig& config,
                      bool keep_outputs) {
  Session session(pipeline, policy, label, config);
  if (!session.known_mode() && input.size() <= config.gate.c) {
    throw DataError("input shorter than sample text (" + std::to_string(input.size()) +
                    " tokens, c=" + std::to_string(config.gate.c) + ")");
  }
  session.set_lookahead(input);
  InferenceResult result;
  result.first_position = session.first_scored_position();
  for (TokenId t : input) {
    if (keep_outputs && session.can_predict()) result.outputs.push_back(session.predict());
    session.observe(t);
  }
  result.trace = session.trace();
  result.gate_events = session.gate_events();
  return result;
}

InferenceResult infer_known(const Pipeline& pipeline, TokenView input,
                            const AccessPolicy& policy, DomainId label,
                            const EngineConfig& config) {
  return infer(pipeline, input, policy, label, config);
}

InferenceResult infer_unknown(const Pipeline& pipeline, TokenView input,
                              const AccessPolicy& policy, const EngineConfig& config) {
  return infer(pipeline, input, policy, std::nullopt, config);
}

Generation generate(const Pipeline& pipeline, TokenView prompt, const AccessPolicy& policy,
                    std::optional<DomainId> label, std::size_t length,
                    const DecodeOptions& decode, const EngineConfig& config) {
  if (decode.mode == Decoding::kSample && !decode.seed) {
    throw ConfigError("sampled decoding needs an explicit seed");
  }
  Session session(pipeline, policy, label, config);
  session.set_lookahead(prompt);
  for (TokenId t : prompt) session.observe(t);
  Rng rng(decode.seed.value_or(0));
  Generation out;
  NextTokenDist dist;
  dist.probs.resize(pipeline.vocab_size());
  for (std::size_t i = 0; i < length; ++i) {
    if (!session.can_predict()) {
      throw DataError("prompt shorter than sample text (c=" + std::to_string(config.gate.c) +
                      ")");
    }
    session.predict(dist.probs);
    TokenId next = 0;
    if (decode.mode == Decoding::kGreedy) {
      next = static_cast<TokenId>(std::max_element(dist.probs.begin(), dist.probs.end()) -
                                  dist.probs.begin());
    } else {
      const double u = rng.uniform();
      double acc = 0.0;
      next = static_cast<TokenId>(dist.probs.size() - 1);
      for (std::size_t v = 0; v < dist.probs.size(); ++v) {
        acc += dist.probs[v];
        if (u < acc) {
          next = static_cast<TokenId>(v);
          break;
        }
      }
    }
    session.observe(next);
    out.tokens.push_back(next);
  }
  out.trace = session.trace();
  out.gate_events = session.gate_events();
  return out;
}

EvalReport evaluate(const Pipeline& pipeline, TokenView text, const AccessPolicy& policy,
                    std::optional<DomainId> label, const EngineConfig& config,
                    std::size_t min_position) {
  Session session(pipeline, policy, label, config);
  if (!session.known_mode() && text.size() <= config.gate.c) {
    throw DataError("test text shorter than sample text (c=" + std::to_string(config.gate.c) +
                    ")");
  }
  session.set_lookahead(text);
  session.set_record_trace(false);
  EvalReport report;
  report.first_position = std::max(min_position, session.first_scored_position());
  double sum = 0.0;
  double base_sum = 0.0;
  for (std::size_t p = 0; p < text.size(); ++p) {
    const bool scored = p >= report.first_position && session.can_predict();
    const double lp = session.observe(text[p]);
    if (!scored) continue;
    sum += lp;
    base_sum += std::log(pipeline.base().prob(text.first(p), text[p]));
    ++report.scored;
  }
  if (report.scored == 0) throw DataError("no scorable positions in the test text");
  const double n = static_cast<double>(report.scored);
  report.perplexity = std::exp(-sum / n);
  report.base_perplexity = std::exp(-base_sum / n);
  report.normalized = report.perplexity / report.base_perplexity;
  report.selections = session.gate_events();
  return report;
}

}  // namespace ifcmoe
