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

#ifndef IFCMOE_ARTIFACTS_H_
#define IFCMOE_ARTIFACTS_H_

#include <filesystem>
#include <optional>
#include <string>

#include "ifcmoe/gating.h"
#include "ifcmoe/pipeline.h"

namespace ifcmoe {

// Writes a model directory: `base`, `expert_<id>`, `pplx_matrix`,
// `clusters`, `domain_vectors` and `model.json`. Every file carries the
// corpus manifest hash and model.json records a digest of each file.
void save_pipeline(const Pipeline& pipeline, const std::filesystem::path& dir);

// Reads a model directory. Throws StaleArtifact when a file was changed
// after saving, when the files disagree on the corpus hash, or when
// `expected_corpus_hash` is given and differs.
Pipeline load_pipeline(const std::filesystem::path& dir,
                       const std::optional<std::string>& expected_corpus_hash = std::nullopt);

std::string read_model_corpus_hash(const std::filesystem::path& dir);

// Individual artifact formats.
std::string write_matrix(const PerplexityMatrix& matrix, const std::string& corpus_hash);
PerplexityMatrix read_matrix(const std::string& text, std::string* corpus_hash);
std::string write_clusters(const ClusterPartition& partition, const std::string& corpus_hash);
ClusterPartition read_clusters(const std::string& text, std::size_t m, std::string* corpus_hash);
std::string write_vectors(const DomainVectorTable& vectors, const EmbeddingParams& params,
                          const std::string& corpus_hash);
DomainVectorTable read_vectors(const std::string& text, const EmbeddingParams& params,
                               std::string* corpus_hash);

}  // namespace ifcmoe

#endif  // IFCMOE_ARTIFACTS_H_
