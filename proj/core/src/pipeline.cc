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

#include "ifcmoe/pipeline.h"

#include <algorithm>

#include "ifcmoe/error.h"

namespace ifcmoe {

void TrainConfig::validate(std::size_t m) const {
  ngram.validate();
  embedding.validate();
  if (heldout_cap < 1) throw ConfigError("heldout_cap must be positive");
  (void)m;
  if (clusters < 1) throw ConfigError("clusters must be positive");
  if (kmeans_iterations < 1) throw ConfigError("kmeans_iterations must be positive");
}

Pipeline::Pipeline(TrainConfig config, std::shared_ptr<const BaseModel> base,
                   std::vector<Expert> experts, PerplexityMatrix matrix,
                   DomainVectorTable vectors, ClusterPartition partition, DomainStats stats,
                   std::string corpus_hash)
    : config_(std::move(config)),
      base_(std::move(base)),
      experts_(std::move(experts)),
      matrix_(std::move(matrix)),
      vectors_(std::move(vectors)),
      partition_(std::move(partition)),
      stats_(std::move(stats)),
      embedder_(config_.embedding),
      corpus_hash_(std::move(corpus_hash)) {
  const std::size_t m = experts_.size();
  for (std::size_t j = 0; j < m; ++j) {
    if (experts_[j].domain() != j + 1) {
      throw DataError("missing expert for domain " + std::to_string(j + 1));
    }
  }
  if (matrix_.m() != m || vectors_.size() != m || stats_.m() != m) {
    throw DataError("pipeline artifacts disagree on the number of domains");
  }
}

TokenSeq heldout_sample(const DomainDataset& domain, std::size_t cap) {
  const std::size_t n = std::min(cap, domain.heldout.size());
  return TokenSeq(domain.heldout.begin(), domain.heldout.begin() + n);
}

Pipeline Pipeline::train(const Corpus& corpus, const TrainConfig& config) {
  const std::size_t m = corpus.m();
  if (m < 1) throw ConfigError("corpus has no seen domains");
  config.validate(m);
  auto base = std::make_shared<const BaseModel>(
      train_base(corpus.public_set, corpus.vocabulary.size(), config.ngram));
  std::vector<Expert> experts;
  experts.reserve(m);
  std::vector<TokenSeq> heldout;
  std::vector<EmbeddingVector> vectors;
  const Embedder embedder(config.embedding);
  for (const auto& d : corpus.domains) {
    experts.push_back(train_expert(base, d, config.ngram));
    heldout.push_back(heldout_sample(d, config.heldout_cap));
    vectors.push_back(embedder.domain_vector(d));
  }
  auto matrix = build_perplexity_matrix(experts, heldout);
  DomainVectorTable table(std::move(vectors));
  std::vector<DomainId> ids(m);
  for (std::size_t i = 0; i < m; ++i) ids[i] = static_cast<DomainId>(i + 1);
  auto partition = compute_clusters(table, ids, std::min(config.clusters, m), config.cluster_seed,
                                    config.kmeans_iterations);
  return Pipeline(config, std::move(base), std::move(experts), std::move(matrix),
                  std::move(table), std::move(partition), DomainStats(corpus.sample_counts()),
                  corpus.manifest_hash());
}

const Expert& Pipeline::expert(DomainId id) const {
  if (id < 1 || id > experts_.size()) {
    throw ConfigError("no expert for domain " + std::to_string(id));
  }
  if (audit_) audit_->record(ArtifactKind::kExpert, id);
  return experts_[id - 1];
}

void Pipeline::set_audit(ArtifactAudit* audit) {
  audit_ = audit;
  matrix_.set_audit(audit);
  vectors_.set_audit(audit);
  stats_.set_audit(audit);
}

}  // namespace ifcmoe
