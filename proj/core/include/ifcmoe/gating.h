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

#ifndef IFCMOE_GATING_H_
#define IFCMOE_GATING_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ifcmoe/embedding.h"
#include "ifcmoe/ngram.h"
#include "ifcmoe/policy.h"
#include "ifcmoe/types.h"

namespace ifcmoe {

// Gating hyperparameters. Defaults are the desk-scale values; the
// GPT-2-scale reference values are k=3, r=500k, c=10k, s=10, lambda=0.4.
struct GateConfig {
  std::size_t k = 3;       // experts to ensemble
  std::size_t r = 256;     // tokens between re-gating
  std::size_t c = 64;      // sample-text tokens
  std::size_t s = 4;       // clusters for gate-cluster
  double lambda = 0.2;     // small-domain penalty

  // Throws ConfigError on any invariant violation; `m` bounds s.
  void validate(std::size_t m) const;
  bool operator==(const GateConfig&) const = default;
};

// Which domains' sizes normalise the size fraction S_n.
enum class SizeDenominator { kAll, kAccessible };

// m x m table; value(i, j) is the perplexity of expert j on the held-out
// text of domain i. Every cell read is reported to the attached audit.
class PerplexityMatrix {
 public:
  PerplexityMatrix() = default;
  PerplexityMatrix(std::size_t m, std::vector<double> values,
                   std::vector<std::size_t> heldout_counts);

  std::size_t m() const { return m_; }
  double value(DomainId row, DomainId col) const;
  const std::vector<double>& raw() const { return values_; }
  const std::vector<std::size_t>& heldout_counts() const { return heldout_counts_; }

  void set_audit(ArtifactAudit* audit) { audit_ = audit; }
  bool operator==(const PerplexityMatrix& o) const {
    return m_ == o.m_ && values_ == o.values_ && heldout_counts_ == o.heldout_counts_;
  }

 private:
  std::size_t m_ = 0;
  std::vector<double> values_;  // row-major
  std::vector<std::size_t> heldout_counts_;
  ArtifactAudit* audit_ = nullptr;
};

// Entry [i] is perplexity of every expert on heldout[i]. `experts[j]` must
// be the expert of domain j+1 and `heldout[i]` the held-out text of
// domain i+1.
PerplexityMatrix build_perplexity_matrix(std::span<const Expert> experts,
                                         std::span<const TokenSeq> heldout);

// Representative vectors of domains 1..m.
class DomainVectorTable {
 public:
  DomainVectorTable() = default;
  explicit DomainVectorTable(std::vector<EmbeddingVector> vectors);

  std::size_t size() const { return vectors_.size(); }
  std::size_t dim() const { return vectors_.empty() ? 0 : vectors_[0].dim(); }
  const EmbeddingVector& at(DomainId id) const;
  // Unaudited access for offline artifact handling.
  const std::vector<EmbeddingVector>& raw() const { return vectors_; }

  void set_audit(ArtifactAudit* audit) { audit_ = audit; }
  bool operator==(const DomainVectorTable& o) const { return vectors_ == o.vectors_; }

 private:
  std::vector<EmbeddingVector> vectors_;
  ArtifactAudit* audit_ = nullptr;
};

// Per-domain training-set sizes, count(d_n). Declared public metadata.
class DomainStats {
 public:
  DomainStats() = default;
  explicit DomainStats(std::vector<std::uint64_t> counts, bool declared_public = true);

  std::size_t m() const { return counts_.size(); }
  std::uint64_t count(DomainId id) const;
  bool declared_public() const { return declared_public_; }
  const std::vector<std::uint64_t>& raw() const { return counts_; }

  void set_audit(ArtifactAudit* audit) { audit_ = audit; }

 private:
  std::vector<std::uint64_t> counts_;
  bool declared_public_ = true;
  ArtifactAudit* audit_ = nullptr;
};

// Lambda and the S_n denominator resolved once per (policy, config).
struct SizePrior {
  double lambda = 0.0;
  double denominator = 1.0;
};

SizePrior make_size_prior(const DomainStats& stats, const AccessPolicy& policy,
                          SizeDenominator mode, double lambda);

// phi' = phi + lambda * count(d_n) / denominator.
double score(double phi, DomainId n, const DomainStats& stats, const SizePrior& prior);
double score(double phi, DomainId n, const DomainStats& stats, const AccessPolicy& policy,
             double lambda, SizeDenominator mode);

// Accessible experts ranked by ascending M[label][j], truncated to k.
// Reads only row `label` and accessible columns. Throws PolicyViolation if
// the label itself is not accessible.
std::vector<DomainId> gate_known(const PerplexityMatrix& matrix, const AccessPolicy& policy,
                                 DomainId label, std::size_t k);

struct ScoredDomain {
  double score;
  DomainId id;
};

// Sorts by score descending, then id ascending, and keeps the first k ids.
std::vector<DomainId> top_k(std::vector<ScoredDomain> scored, std::size_t k);

std::vector<DomainId> gate_pairwise(const EmbeddingVector& query, const AccessPolicy& policy,
                                    std::size_t k, const SizePrior& prior,
                                    const DomainStats& stats,
                                    const DomainVectorTable& vectors);

struct ClusterPartition {
  std::size_t s = 0;
  std::uint64_t seed = 0;
  // members[c - 1]: ascending domain ids of cluster c.
  std::vector<std::vector<DomainId>> members;
  // centroids[c - 1]: mean of the member vectors, summed in id order.
  std::vector<EmbeddingVector> centroids;
  // assignment[id - 1]: cluster of domain id, 0 when not covered.
  std::vector<std::uint32_t> assignment;

  std::uint32_t cluster_of(DomainId id) const;
  bool operator==(const ClusterPartition&) const = default;
};

// Cosine k-means over the vectors of `ids`: seeded farthest-point
// initialisation, at most `max_iterations` Lloyd steps, and no empty
// clusters. Deterministic for a given seed.
ClusterPartition compute_clusters(const DomainVectorTable& vectors,
                                  std::span<const DomainId> ids, std::size_t s,
                                  std::uint64_t seed, std::size_t max_iterations = 100);

// Mean of the given members' vectors, accumulated in the given order.
EmbeddingVector centroid_of(const DomainVectorTable& vectors,
                            std::span<const DomainId> members);

enum class CentroidMode {
  // Centroid over the cluster's accessible members only.
  kAccessibleMembers,
  // The stored all-member centroid; depends on inaccessible vectors.
  kAllMembers,
};

// Among clusters holding at least one accessible domain, the one whose
// centroid is most cosine-similar to `query` (ties: lower cluster id).
std::uint32_t nearest_cluster(const EmbeddingVector& query, const ClusterPartition& partition,
                              const AccessPolicy& policy, const DomainVectorTable& vectors,
                              CentroidMode mode);

// Pairwise gating restricted to the accessible members of the nearest
// cluster. May return fewer than k experts.
std::vector<DomainId> gate_cluster(const EmbeddingVector& query, const AccessPolicy& policy,
                                   std::size_t k, const SizePrior& prior,
                                   const DomainStats& stats, const ClusterPartition& partition,
                                   const DomainVectorTable& vectors, CentroidMode mode);

}  // namespace ifcmoe

#endif  // IFCMOE_GATING_H_
