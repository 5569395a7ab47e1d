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

#include "ifcmoe/ablation.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ifcmoe/error.h"
#include "ifcmoe/random.h"

namespace ifcmoe {

std::string_view to_string(AblationKnob knob) {
  switch (knob) {
    case AblationKnob::kK:
      return "k";
    case AblationKnob::kLambda:
      return "lambda";
    case AblationKnob::kC:
      return "c";
  }
  return "?";
}

AblationKnob parse_knob(std::string_view name) {
  if (name == "k") return AblationKnob::kK;
  if (name == "lambda") return AblationKnob::kLambda;
  if (name == "c") return AblationKnob::kC;
  throw ConfigError("unknown ablation knob '" + std::string(name) + "' (k, lambda or c)");
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t as_count(double v, std::string_view knob) {
  if (!(v >= 1.0) || v != std::floor(v)) {
    throw ConfigError(std::string(knob) + " values must be positive integers");
  }
  return static_cast<std::size_t>(v);
}

std::vector<AblationRow> ablate_identification(const Pipeline& pipeline, const Corpus& corpus,
                                               const AblationOptions& options) {
  std::size_t longest = 0;
  for (double v : options.values) longest = std::max(longest, as_count(v, "c"));
  const AccessPolicy policy = AccessPolicy::all(pipeline.m());
  const SizePrior prior = make_size_prior(pipeline.stats(), policy,
                                          options.engine.size_denominator,
                                          options.engine.gate.lambda);
  // Nested samples: each c reads a prefix of the same span.
  struct Sample {
    DomainId domain;
    std::size_t offset;
  };
  Rng rng(options.seed);
  std::vector<Sample> samples;
  for (std::size_t i = 0; i < options.samples; ++i) {
    const auto d = static_cast<DomainId>(1 + rng.index(pipeline.m()));
    const std::size_t len = corpus.domain(d).test.size();
    if (len < longest) {
      throw DataError("test split of domain " + std::to_string(d) + " is shorter than c=" +
                      std::to_string(longest));
    }
    samples.push_back({d, rng.index(len - longest + 1)});
  }
  std::vector<AblationRow> rows;
  for (double v : options.values) {
    const std::size_t c = as_count(v, "c");
    std::size_t hits = 0;
    for (const Sample& s : samples) {
      const TokenView text = TokenView(corpus.domain(s.domain).test).subspan(s.offset, c);
      const auto top = gate_pairwise(pipeline.embedder().vectorize(text), policy, 1, prior,
                                     pipeline.stats(), pipeline.vectors());
      hits += top.front() == s.domain;
    }
    AblationRow row;
    row.value = v;
    row.accessible = pipeline.m();
    row.policies = 1;
    row.evaluations = samples.size();
    row.normalized = kNaN;
    row.identification = static_cast<double>(hits) / static_cast<double>(samples.size());
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

AblationResult ablate(const Pipeline& pipeline, const Corpus& corpus,
                      const AblationOptions& options) {
  if (options.values.empty()) throw ConfigError("ablation needs at least one value");
  AblationResult result;
  if (options.knob == AblationKnob::kC) {
    result.rows = ablate_identification(pipeline, corpus, options);
    return result;
  }
  if (options.policies_per_bin < 1) throw ConfigError("policies_per_bin must be at least 1");

  const std::size_t m = pipeline.m();
  std::vector<std::size_t> bins = options.bins;
  if (bins.empty()) {
    for (std::size_t a = 1; a <= m; ++a) bins.push_back(a);
  }
  Rng rng(options.seed);
  for (std::size_t a : bins) {
    if (a < 1 || a > m) throw ConfigError("bin size " + std::to_string(a) + " outside 1..m");
    std::vector<AccessPolicy> policies;
    for (std::size_t i = 0; i < options.policies_per_bin; ++i) {
      std::vector<DomainId> ids(m);
      for (std::size_t j = 0; j < m; ++j) ids[j] = static_cast<DomainId>(j + 1);
      rng.shuffle(ids);
      ids.resize(a);
      policies.emplace_back(std::move(ids), m);
    }
    const std::size_t pairs = policies.size() * corpus.domains.size();
    std::vector<double> best_score(pairs, std::numeric_limits<double>::infinity());
    std::vector<double> best_value(pairs, 0.0);
    for (double v : options.values) {
      EngineConfig cfg = options.engine;
      if (options.knob == AblationKnob::kK) {
        cfg.gate.k = as_count(v, "k");
      } else {
        cfg.gate.lambda = v;
      }
      cfg.validate(m);
      double log_sum = 0.0;
      std::size_t n = 0;
      for (const AccessPolicy& policy : policies) {
        for (const DomainDataset& d : corpus.domains) {
          const EvalReport r = evaluate(pipeline, d.test, policy, std::nullopt, cfg, cfg.gate.c);
          log_sum += std::log(r.normalized);
          if (r.normalized < best_score[n] ||
              (r.normalized == best_score[n] && v < best_value[n])) {
            best_score[n] = r.normalized;
            best_value[n] = v;
          }
          ++n;
        }
      }
      AblationRow row;
      row.value = v;
      row.accessible = a;
      row.policies = policies.size();
      row.evaluations = n;
      row.normalized = std::exp(log_sum / static_cast<double>(n));
      row.identification = kNaN;
      result.rows.push_back(row);
    }
    std::sort(best_value.begin(), best_value.end());
    result.median_best[a] = pairs % 2 ? best_value[pairs / 2]
                                      : 0.5 * (best_value[pairs / 2 - 1] + best_value[pairs / 2]);
  }
  return result;
}

std::map<std::size_t, double> best_per_bin(const std::vector<AblationRow>& rows) {
  std::map<std::size_t, std::pair<double, double>> best;  // bin -> (score, value)
  for (const AblationRow& r : rows) {
    auto it = best.find(r.accessible);
    if (it == best.end() || r.normalized < it->second.first ||
        (r.normalized == it->second.first && r.value < it->second.second)) {
      best[r.accessible] = {r.normalized, r.value};
    }
  }
  std::map<std::size_t, double> out;
  for (const auto& [bin, sv] : best) out[bin] = sv.second;
  return out;
}

double best_overall(const std::vector<AblationRow>& rows) {
  std::map<double, std::pair<double, std::size_t>> by_value;
  for (const AblationRow& r : rows) {
    auto& acc = by_value[r.value];
    acc.first += std::log(r.normalized) * static_cast<double>(r.evaluations);
    acc.second += r.evaluations;
  }
  if (by_value.empty()) throw ConfigError("no ablation rows");
  double best_value = by_value.begin()->first;
  double best_score = std::numeric_limits<double>::infinity();
  for (const auto& [value, acc] : by_value) {
    const double score = acc.first / static_cast<double>(acc.second);
    if (score < best_score) {
      best_score = score;
      best_value = value;
    }
  }
  return best_value;
}

}  // namespace ifcmoe
