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

#include "ifcmoe/gating.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ifcmoe/error.h"
#include "ifcmoe/random.h"

namespace ifcmoe {

void GateConfig::validate(std::size_t m) const {
  if (k < 1) throw ConfigError("k must be at least 1");
  if (r < 1) throw ConfigError("r must be at least 1");
  if (c < 1) throw ConfigError("c must be at least 1");
  if (s < 1 || s > m) {
    throw ConfigError("s must be in 1.." + std::to_string(m) + " (got " + std::to_string(s) + ")");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must be in [0, 1]");
}

PerplexityMatrix::PerplexityMatrix(std::size_t m, std::vector<double> values,
                                   std::vector<std::size_t> heldout_counts)
    : m_(m), values_(std::move(values)), heldout_counts_(std::move(heldout_counts)) {
  if (values_.size() != m_ * m_ || heldout_counts_.size() != m_) {
    throw DataError("perplexity matrix shape does not match m");
  }
}

double PerplexityMatrix::value(DomainId row, DomainId col) const {
  if (row < 1 || row > m_ || col < 1 || col > m_) {
    throw ConfigError("perplexity matrix index out of range");
  }
  if (audit_) audit_->record(ArtifactKind::kMatrixCell, row, col);
  return values_[(row - 1) * m_ + (col - 1)];
}

PerplexityMatrix build_perplexity_matrix(std::span<const Expert> experts,
                                         std::span<const TokenSeq> heldout) {
  const std::size_t m = heldout.size();
  if (experts.size() < m) {
    throw DataError("missing expert for domain " + std::to_string(experts.size() + 1));
  }
  if (heldout.size() < experts.size()) {
    throw DataError("missing held-out text for domain " + std::to_string(heldout.size() + 1));
  }
  for (std::size_t j = 0; j < m; ++j) {
    if (experts[j].domain() != j + 1) {
      throw DataError("missing expert for domain " + std::to_string(j + 1));
    }
    if (heldout[j].empty()) {
      throw DataError("missing held-out text for domain " + std::to_string(j + 1));
    }
  }
  std::vector<double> values(m * m);
  std::vector<std::size_t> counts(m);
  for (std::size_t i = 0; i < m; ++i) {
    counts[i] = heldout[i].size();
    for (std::size_t j = 0; j < m; ++j) values[i * m + j] = perplexity(experts[j], heldout[i]);
  }
  return PerplexityMatrix(m, std::move(values), std::move(counts));
}

DomainVectorTable::DomainVectorTable(std::vector<EmbeddingVector> vectors)
    : vectors_(std::move(vectors)) {
  for (const auto& v : vectors_) {
    if (v.dim() != vectors_[0].dim()) throw DataError("domain vectors differ in dimension");
  }
}

const EmbeddingVector& DomainVectorTable::at(DomainId id) const {
  if (id < 1 || id > vectors_.size()) {
    throw ConfigError("no domain vector for domain " + std::to_string(id));
  }
  if (audit_) audit_->record(ArtifactKind::kDomainVector, id);
  return vectors_[id - 1];
}

DomainStats::DomainStats(std::vector<std::uint64_t> counts, bool declared_public)
    : counts_(std::move(counts)), declared_public_(declared_public) {}

std::uint64_t DomainStats::count(DomainId id) const {
  if (id < 1 || id > counts_.size()) {
    throw ConfigError("no sample count for domain " + std::to_string(id));
  }
  if (audit_) audit_->record(ArtifactKind::kDomainCount, id);
  return counts_[id - 1];
}

SizePrior make_size_prior(const DomainStats& stats, const AccessPolicy& policy,
                          SizeDenominator mode, double lambda) {
  SizePrior prior;
  prior.lambda = lambda;
  if (lambda == 0.0) return prior;
  double total = 0.0;
  if (mode == SizeDenominator::kAll) {
    for (DomainId id = 1; id <= stats.m(); ++id) total += static_cast<double>(stats.count(id));
  } else {
    for (DomainId id : policy.ids()) total += static_cast<double>(stats.count(id));
  }
  prior.denominator = total > 0.0 ? total : 1.0;
  return prior;
}

double score(double phi, DomainId n, const DomainStats& stats, const SizePrior& prior) {
  if (prior.lambda == 0.0) return phi;
  const double fraction = static_cast<double>(stats.count(n)) / prior.denominator;
  return phi + prior.lambda * fraction;
}

double score(double phi, DomainId n, const DomainStats& stats, const AccessPolicy& policy,
             double lambda, SizeDenominator mode) {
  return score(phi, n, stats, make_size_prior(stats, policy, mode, lambda));
}

std::vector<DomainId> gate_known(const PerplexityMatrix& matrix, const AccessPolicy& policy,
                                 DomainId label, std::size_t k) {
  if (k < 1) throw ConfigError("k must be at least 1");
  if (!policy.contains(label)) {
    throw PolicyViolation("domain label " + std::to_string(label) +
                          " is outside the access policy");
  }
  std::vector<ScoredDomain> scored;
  scored.reserve(policy.size());
  // Negated so that top_k's descending order ranks lowest perplexity first.
  for (DomainId j : policy.ids()) scored.push_back({-matrix.value(label, j), j});
  return top_k(std::move(scored), k);
}

std::vector<DomainId> top_k(std::vector<ScoredDomain> scored, std::size_t k) {
  std::sort(scored.begin(), scored.end(), [](const ScoredDomain& a, const ScoredDomain& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  std::vector<DomainId> out;
  out.reserve(std::min(k, scored.size()));
  for (std::size_t i = 0; i < scored.size() && i < k; ++i) out.push_back(scored[i].id);
  return out;
}

std::vector<DomainId> gate_pairwise(const EmbeddingVector& query, const AccessPolicy& policy,
                                    std::size_t k, const SizePrior& prior,
                                    const DomainStats& stats,
                                    const DomainVectorTable& vectors) {
  if (k < 1) throw ConfigError("k must be at least 1");
  if (policy.size() == 0) throw ConfigError("access policy is empty");
  std::vector<ScoredDomain> scored;
  scored.reserve(policy.size());
  for (DomainId n : policy.ids()) {
    const double phi = cosine_similarity(query, vectors.at(n));
    scored.push_back({score(phi, n, stats, prior), n});
  }
  return top_k(std::move(scored), k);
}

std::uint32_t ClusterPartition::cluster_of(DomainId id) const {
  if (id < 1 || id > assignment.size()) return 0;
  return assignment[id - 1];
}

EmbeddingVector centroid_of(const DomainVectorTable& vectors, std::span<const DomainId> members) {
  if (members.empty()) throw DataError("centroid of an empty cluster");
  EmbeddingVector out;
  out.values.assign(vectors.dim(), 0.0);
  for (DomainId id : members) {
    const auto& v = vectors.at(id).values;
    for (std::size_t d = 0; d < v.size(); ++d) out.values[d] += v[d];
  }
  const double n = static_cast<double>(members.size());
  for (double& x : out.values) x /= n;
  return out;
}

namespace {

std::vector<double> unit(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  const double n = std::sqrt(s);
  std::vector<double> out(v);
  if (n > 0.0) {
    for (double& x : out) x /= n;
  }
  return out;
}

double unit_dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

ClusterPartition compute_clusters(const DomainVectorTable& vectors,
                                  std::span<const DomainId> ids, std::size_t s,
                                  std::uint64_t seed, std::size_t max_iterations) {
  const std::size_t n = ids.size();
  if (n == 0) throw ConfigError("cannot cluster an empty domain set");
  if (s < 1 || s > n) {
    throw ConfigError("cluster count s=" + std::to_string(s) + " must be in 1.." +
                      std::to_string(n));
  }
  std::vector<std::vector<double>> points(n);
  for (std::size_t i = 0; i < n; ++i) points[i] = unit(vectors.at(ids[i]).values);

  // Farthest-point initialisation under cosine distance.
  Rng rng(seed);
  std::vector<std::size_t> seeds{rng.index(n)};
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  while (seeds.size() < s) {
    const auto& last = points[seeds.back()];
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], 1.0 - unit_dot(points[i], last));
      if (nearest[i] > best_d) {
        best_d = nearest[i];
        best = i;
      }
    }
    // Duplicate vectors can leave every remaining distance at zero; take the
    // lowest index not already chosen.
    if (std::find(seeds.begin(), seeds.end(), best) != seeds.end()) {
      for (std::size_t i = 0; i < n; ++i) {
        if (std::find(seeds.begin(), seeds.end(), i) == seeds.end()) {
          best = i;
          break;
        }
      }
    }
    seeds.push_back(best);
  }
  std::vector<std::vector<double>> centers(s);
  for (std::size_t c = 0; c < s; ++c) centers[c] = points[seeds[c]];

  std::vector<std::size_t> assign(n, s);
  std::vector<std::vector<double>> sums(s, std::vector<double>(vectors.dim()));
  for (std::size_t iter = 0; iter < std::max<std::size_t>(max_iterations, 1); ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_sim = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < s; ++c) {
        const double sim = unit_dot(points[i], centers[c]);
        if (sim > best_sim) {
          best_sim = sim;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    // No cluster may end up empty: move the worst-fitting point of a
    // multi-member cluster into it.
    std::vector<std::size_t> sizes(s, 0);
    for (std::size_t a : assign) ++sizes[a];
    for (std::size_t c = 0; c < s; ++c) {
      if (sizes[c] != 0) continue;
      std::size_t worst = n;
      double worst_sim = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        if (sizes[assign[i]] < 2) continue;
        const double sim = unit_dot(points[i], centers[assign[i]]);
        if (sim < worst_sim) {
          worst_sim = sim;
          worst = i;
        }
      }
      --sizes[assign[worst]];
      assign[worst] = c;
      ++sizes[c];
      changed = true;
    }
    if (!changed && iter > 0) break;
    for (auto& sum : sums) std::fill(sum.begin(), sum.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < points[i].size(); ++d) sums[assign[i]][d] += points[i][d];
    }
    for (std::size_t c = 0; c < s; ++c) centers[c] = unit(sums[c]);
  }

  // Canonical numbering: clusters ordered by their smallest member id.
  std::vector<std::vector<DomainId>> members(s);
  for (std::size_t i = 0; i < n; ++i) members[assign[i]].push_back(ids[i]);
  for (auto& mem : members) std::sort(mem.begin(), mem.end());
  std::sort(members.begin(), members.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });

  ClusterPartition out;
  out.s = s;
  out.seed = seed;
  out.assignment.assign(vectors.size(), 0);
  for (std::size_t c = 0; c < s; ++c) {
    for (DomainId id : members[c]) out.assignment[id - 1] = static_cast<std::uint32_t>(c + 1);
    out.centroids.push_back(centroid_of(vectors, members[c]));
  }
  out.members = std::move(members);
  return out;
}

std::uint32_t nearest_cluster(const EmbeddingVector& query, const ClusterPartition& partition,
                              const AccessPolicy& policy, const DomainVectorTable& vectors,
                              CentroidMode mode) {
  std::vector<ScoredDomain> scored;
  scored.reserve(partition.s);
  std::vector<DomainId> accessible;
  for (std::size_t c = 0; c < partition.s; ++c) {
    const auto& members = partition.members[c];
    const auto cid = static_cast<DomainId>(c + 1);
    if (mode == CentroidMode::kAllMembers) {
      const bool any = std::any_of(members.begin(), members.end(),
                                   [&](DomainId id) { return policy.contains(id); });
      if (any) scored.push_back({cosine_similarity(query, partition.centroids[c]), cid});
      continue;
    }
    accessible.clear();
    for (DomainId id : members) {
      if (policy.contains(id)) accessible.push_back(id);
    }
    if (accessible.empty()) continue;
    // A fully accessible cluster's stored centroid is the same sum in the
    // same order, so reuse it.
    const double sim = accessible.size() == members.size()
                           ? cosine_similarity(query, partition.centroids[c])
                           : cosine_similarity(query, centroid_of(vectors, accessible));
    scored.push_back({sim, cid});
  }
  if (scored.empty()) {
    throw PolicyViolation("no cluster contains an accessible domain");
  }
  return top_k(std::move(scored), 1).front();
}

std::vector<DomainId> gate_cluster(const EmbeddingVector& query, const AccessPolicy& policy,
                                   std::size_t k, const SizePrior& prior,
                                   const DomainStats& stats, const ClusterPartition& partition,
                                   const DomainVectorTable& vectors, CentroidMode mode) {
  if (k < 1) throw ConfigError("k must be at least 1");
  const std::uint32_t best = nearest_cluster(query, partition, policy, vectors, mode);
  std::vector<ScoredDomain> scored;
  for (DomainId n : partition.members[best - 1]) {
    if (!policy.contains(n)) continue;
    const double phi = cosine_similarity(query, vectors.at(n));
    scored.push_back({score(phi, n, stats, prior), n});
  }
  return top_k(std::move(scored), k);
}

}  // namespace ifcmoe
