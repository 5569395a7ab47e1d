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

#include "ifcmoe/embedding.h"

#include <algorithm>
#include <cmath>

#include "ifcmoe/error.h"
#include "ifcmoe/hash.h"

namespace ifcmoe {

double EmbeddingVector::norm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

void EmbeddingParams::validate() const {
  if (dim < 1) throw ConfigError("embedding dim must be positive");
  if (hashes_per_token < 1 || hashes_per_token > dim) {
    throw ConfigError("hashes_per_token must be in 1..dim");
  }
  if (domain_cap < 1) throw ConfigError("domain_cap must be positive");
}

Embedder::Embedder(EmbeddingParams params) : params_(params) { params_.validate(); }

void Embedder::accumulate(TokenId token, std::vector<std::int64_t>& acc) const {
  std::size_t used[64];
  const std::size_t h = std::min<std::size_t>(params_.hashes_per_token, 64);
  std::uint64_t state = splitmix64(params_.seed ^ (static_cast<std::uint64_t>(token) << 8));
  for (std::size_t i = 0; i < h; ++i) {
    std::size_t idx = 0;
    std::uint64_t bits = 0;
    // Redraw on collision so every bucket of a token is distinct.
    do {
      state = splitmix64(state);
      bits = state;
      idx = static_cast<std::size_t>((bits >> 1) % params_.dim);
    } while (std::find(used, used + i, idx) != used + i);
    used[i] = idx;
    acc[idx] += (bits & 1) ? 1 : -1;
  }
}

EmbeddingVector Embedder::vectorize(TokenView tokens) const {
  if (tokens.empty()) throw DataError("cannot vectorize an empty token sequence");
  std::vector<std::int64_t> acc(params_.dim, 0);
  for (TokenId t : tokens) accumulate(t, acc);
  const double scale =
      static_cast<double>(tokens.size()) *
      std::sqrt(static_cast<double>(std::min<std::size_t>(params_.hashes_per_token, 64)));
  EmbeddingVector out;
  out.values.resize(params_.dim);
  for (std::size_t i = 0; i < params_.dim; ++i) {
    out.values[i] = static_cast<double>(acc[i]) / scale;
  }
  return out;
}

EmbeddingVector Embedder::token_feature(TokenId token) const {
  const TokenId one[] = {token};
  return vectorize(one);
}

EmbeddingVector Embedder::domain_vector(const DomainDataset& domain) const {
  if (domain.train.empty()) {
    throw DataError("domain " + std::to_string(domain.id) + " has an empty train split");
  }
  const std::size_t n = std::min(domain.train.size(), params_.domain_cap);
  return vectorize(TokenView(domain.train).first(n));
}

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) throw ConfigError("embedding dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += a.values[i] * b.values[i];
  return s;
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw DataError("cosine similarity of a zero vector");
  const double c = dot(a, b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

}  // namespace ifcmoe
