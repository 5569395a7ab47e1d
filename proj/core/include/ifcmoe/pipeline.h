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

#ifndef IFCMOE_PIPELINE_H_
#define IFCMOE_PIPELINE_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ifcmoe/corpus.h"
#include "ifcmoe/embedding.h"
#include "ifcmoe/gating.h"
#include "ifcmoe/ngram.h"
#include "ifcmoe/policy.h"

namespace ifcmoe {

// Offline-phase parameters: everything that shapes the trained artifacts.
struct TrainConfig {
  NgramParams ngram;
  EmbeddingParams embedding;
  // Held-out tokens per domain used for the perplexity matrix; the
  // effective size is min(heldout_cap, heldout split).
  std::size_t heldout_cap = 5000;
  // Cluster count of the all-domain partition (capped at m).
  std::size_t clusters = 4;
  std::uint64_t cluster_seed = 17;
  std::size_t kmeans_iterations = 100;

  void validate(std::size_t m) const;
};

// Every offline artifact of one corpus: the public base, one expert per
// seen domain, the perplexity matrix, domain vectors, the all-domain
// cluster partition, and the public size metadata. Immutable after
// construction apart from audit attachment.
class Pipeline {
 public:
  Pipeline(TrainConfig config, std::shared_ptr<const BaseModel> base,
           std::vector<Expert> experts, PerplexityMatrix matrix, DomainVectorTable vectors,
           ClusterPartition partition, DomainStats stats, std::string corpus_hash);

  static Pipeline train(const Corpus& corpus, const TrainConfig& config);

  std::size_t m() const { return experts_.size(); }
  std::size_t vocab_size() const { return base_->vocab_size(); }
  const TrainConfig& config() const { return config_; }
  const std::string& corpus_hash() const { return corpus_hash_; }

  const BaseModel& base() const { return *base_; }
  const std::shared_ptr<const BaseModel>& base_ptr() const { return base_; }
  // Audited: reports a kExpert read.
  const Expert& expert(DomainId id) const;
  const std::vector<Expert>& experts() const { return experts_; }
  const PerplexityMatrix& matrix() const { return matrix_; }
  const DomainVectorTable& vectors() const { return vectors_; }
  const ClusterPartition& partition() const { return partition_; }
  const DomainStats& stats() const { return stats_; }
  const Embedder& embedder() const { return embedder_; }

  void set_audit(ArtifactAudit* audit);

 private:
  TrainConfig config_;
  std::shared_ptr<const BaseModel> base_;
  std::vector<Expert> experts_;
  PerplexityMatrix matrix_;
  DomainVectorTable vectors_;
  ClusterPartition partition_;
  DomainStats stats_;
  Embedder embedder_;
  std::string corpus_hash_;
  ArtifactAudit* audit_ = nullptr;
};

// Held-out prefix used for matrix row i.
TokenSeq heldout_sample(const DomainDataset& domain, std::size_t cap);

}  // namespace ifcmoe

#endif  // IFCMOE_PIPELINE_H_
