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

#include <algorithm>
#include <cstring>
#include <sstream>

#include "ifcmoe/error.h"
#include "ifcmoe/random.h"

namespace ifcmoe {

std::string_view to_string(PerturbationKind kind) {
  switch (kind) {
    case PerturbationKind::kFreshSynthetic:
      return "fresh-synthetic";
    case PerturbationKind::kShuffle:
      return "shuffle";
    case PerturbationKind::kTruncateHalf:
      return "truncate-half";
    case PerturbationKind::kTokenSubstitute:
      return "token-substitute";
  }
  return "?";
}

PerturbationKind parse_perturbation(std::string_view name) {
  for (PerturbationKind k : kAllPerturbations) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown perturbation '" + std::string(name) + "'");
}

namespace {

TokenId random_token(Rng& rng, std::size_t vocab) {
  // Skip the unknown id so substitutes are real tokens.
  return static_cast<TokenId>(1 + rng.index(vocab - 1));
}

void perturb_split(TokenSeq& split, PerturbationKind kind, Rng& rng, std::size_t vocab) {
  switch (kind) {
    case PerturbationKind::kFreshSynthetic: {
      const double scale = 0.5 + rng.uniform();
      const auto n = std::max<std::size_t>(
          1, static_cast<std::size_t>(static_cast<double>(split.size()) * scale));
      split.assign(n, 0);
      for (TokenId& t : split) t = random_token(rng, vocab);
      break;
    }
    case PerturbationKind::kShuffle:
      rng.shuffle(split);
      break;
    case PerturbationKind::kTruncateHalf:
      split.resize(std::max<std::size_t>(1, split.size() / 2));
      break;
    case PerturbationKind::kTokenSubstitute:
      for (TokenId& t : split) {
        if (rng.bernoulli(0.2)) t = random_token(rng, vocab);
      }
      break;
  }
}

bool same_bits(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

}  // namespace

Corpus perturb(const Corpus& corpus, const Perturbation& p, const AccessPolicy* guard) {
  Corpus out = corpus;
  const std::size_t vocab = corpus.vocabulary.size();
  if (vocab < 2) throw DataError("vocabulary too small to perturb");
  for (DomainId id : p.targets) {
    if (id < 1 || id > corpus.m()) {
      throw ConfigError("perturbation target " + std::to_string(id) + " is not a seen domain");
    }
    if (guard && guard->contains(id)) {
      throw PolicyViolation("perturbation target " + std::to_string(id) +
                            " is accessible under policy " + guard->to_string());
    }
    DomainDataset& d = out.domains[id - 1];
    Rng rng(derive_seed(p.seed, id));
    perturb_split(d.train, p.kind, rng, vocab);
    perturb_split(d.heldout, p.kind, rng, vocab);
  }
  return out;
}

std::string NiReport::to_text() const {
  std::ostringstream os;
  os << "ni-check " << (pass ? "PASS" : "FAIL") << " comparisons=" << comparisons
     << " positions=" << positions << " skipped_policies=" << skipped_policies << '\n';
  if (first) {
    os << "divergence policy=" << first->policy << " perturbation=" << first->perturbation
       << " backend=" << to_string(first->backend) << " query=" << first->query
       << " position=" << first->position << " component=" << first->component
       << " detail=" << first->detail << '\n';
  }
  return os.str();
}

NiReport compare_pipelines(const Pipeline& a, const Pipeline& b, const AccessPolicy& policy,
                           std::span<const NiQuery> queries, const EngineConfig& engine,
                           std::span<const GateBackend> backends,
                           std::string_view perturbation_name, bool stop_at_first) {
  NiReport report;
  std::vector<double> da(a.vocab_size());
  std::vector<double> db(b.vocab_size());
  for (GateBackend backend : backends) {
    EngineConfig cfg = engine;
    cfg.label_fallback = true;
    std::optional<DomainId> use_label;
    if (backend != GateBackend::kKnown) cfg.backend = backend;
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
      const NiQuery& q = queries[qi];
      use_label = backend == GateBackend::kKnown ? q.label : std::nullopt;
      if (!use_label && q.tokens.size() <= cfg.gate.c) continue;
      Session sa(a, policy, use_label, cfg);
      Session sb(b, policy, use_label, cfg);
      sa.set_lookahead(q.tokens);
      sb.set_lookahead(q.tokens);
      sa.set_record_trace(false);
      sb.set_record_trace(false);
      ++report.comparisons;
      for (std::size_t p = 0; p < q.tokens.size(); ++p) {
        if (sa.can_predict() != sb.can_predict()) {
          throw Error("sessions disagree on scorable positions");
        }
        if (sa.can_predict()) {
          std::string component;
          std::string detail;
          if (sa.experts() != sb.experts()) {
            component = "gate-selection";
            detail = join(sa.experts()) + " vs " + join(sb.experts());
          } else if (!same_bits(sa.weights().weights, sb.weights().weights)) {
            component = "weights";
            detail = "posterior differs";
          } else {
            sa.predict(da);
            sb.predict(db);
            if (!same_bits(da, db)) {
              component = "distribution";
              std::size_t v = 0;
              while (v < da.size() && da[v] == db[v]) ++v;
              detail = "first differing token id " + std::to_string(v);
            }
          }
          ++report.positions;
          if (!component.empty()) {
            report.pass = false;
            if (!report.first) {
              report.first = Divergence{policy.to_string(), std::string(perturbation_name),
                                        backend, qi, p, component, detail};
            }
            if (stop_at_first) return report;
            break;
          }
        }
        sa.observe(q.tokens[p]);
        sb.observe(q.tokens[p]);
      }
    }
  }
  return report;
}

NiReport verify_ni(const Corpus& corpus, std::span<const AccessPolicy> policies,
                   std::span<const NiQuery> queries, const TrainConfig& train,
                   const EngineConfig& engine, const NiOptions& options) {
  if (!engine.strict) {
    throw ConfigError(
        "ni-check needs strict gating: non-strict gate-cluster reads the all-domain "
        "partition and is not non-interfering by design");
  }
  if (queries.empty()) throw ConfigError("ni-check needs at least one query");
  const Pipeline reference = Pipeline::train(corpus, train);
  NiReport total;
  for (std::size_t pi = 0; pi < policies.size(); ++pi) {
    const AccessPolicy& policy = policies[pi];
    std::vector<DomainId> targets;
    for (DomainId id = 1; id <= corpus.m(); ++id) {
      if (!policy.contains(id)) targets.push_back(id);
    }
    if (targets.empty()) {
      ++total.skipped_policies;
      continue;
    }
    for (std::size_t ki = 0; ki < options.kinds.size(); ++ki) {
      const Perturbation p{targets, options.kinds[ki],
                           derive_seed(options.seed, pi * 16 + ki)};
      const Pipeline other = Pipeline::train(perturb(corpus, p, &policy), train);
      const NiReport r = compare_pipelines(reference, other, policy, queries, engine,
                                           options.backends, to_string(p.kind),
                                           options.stop_at_first);
      total.comparisons += r.comparisons;
      total.positions += r.positions;
      if (!r.pass) {
        total.pass = false;
        if (!total.first) total.first = r.first;
        if (options.stop_at_first) return total;
      }
    }
  }
  return total;
}

}  // namespace ifcmoe
