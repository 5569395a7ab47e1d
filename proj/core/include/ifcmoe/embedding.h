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

#ifndef IFCMOE_EMBEDDING_H_
#define IFCMOE_EMBEDDING_H_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ifcmoe/corpus.h"
#include "ifcmoe/types.h"

namespace ifcmoe {

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  double norm() const;
  bool operator==(const EmbeddingVector&) const = default;
};

struct EmbeddingParams {
  std::size_t dim = 256;
  std::uint64_t seed = 0x5eedf00dULL;
  // Signed buckets per token; all distinct, so no token vector is zero.
  std::size_t hashes_per_token = 4;
  // Train-split prefix used for a domain's representative vector.
  std::size_t domain_cap = 100000;

  void validate() const;
  bool operator==(const EmbeddingParams&) const = default;
};

// Seeded signed feature hashing of token ids, averaged over the input.
// Accumulation is in integers, so the result depends only on the token
// multiset and is bit-identical across runs and platforms.
class Embedder {
 public:
  explicit Embedder(EmbeddingParams params = {});

  const EmbeddingParams& params() const { return params_; }

  EmbeddingVector vectorize(TokenView tokens) const;
  EmbeddingVector token_feature(TokenId token) const;
  EmbeddingVector domain_vector(const DomainDataset& domain) const;

 private:
  void accumulate(TokenId token, std::vector<std::int64_t>& acc) const;

  EmbeddingParams params_;
};

// dot(a, b) / (|a| |b|). Throws on a zero vector or a dimension mismatch.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);
double dot(const EmbeddingVector& a, const EmbeddingVector& b);

}  // namespace ifcmoe

#endif  // IFCMOE_EMBEDDING_H_
