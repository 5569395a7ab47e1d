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

#ifndef IFCMOE_NGRAM_H_
#define IFCMOE_NGRAM_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ifcmoe/corpus.h"
#include "ifcmoe/types.h"

namespace ifcmoe {

struct NgramParams {
  int order = 3;
  double smoothing_k = 0.1;
  // Interpolation weight of the domain estimate in each expert.
  double mix = 0.7;

  void validate() const;
};

// Probability vector over the vocabulary.
struct NextTokenDist {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  bool operator==(const NextTokenDist&) const = default;
};

// Context -> next-token counts for every context length 0..order-1.
//
// Smoothing is add-k toward the next-shorter context: with alpha = k * V,
//   p_L(v) = (c_L(ctx, v) + alpha * p_{L-1}(v)) / (c_L(ctx) + alpha)
// and p_{-1} uniform. A context never seen at level L passes p_{L-1}
// through unchanged. At level 0 this is plain add-k; with k = 0 a seen
// context gives the maximum-likelihood ratio.
class NgramCounts {
 public:
  struct Row {
    std::uint64_t total = 0;
    // Sorted by token id.
    std::vector<std::pair<TokenId, std::uint32_t>> entries;

    std::uint32_t count(TokenId t) const;
    bool operator==(const Row&) const = default;
  };

  NgramCounts() = default;
  NgramCounts(int order, std::size_t vocab_size);

  // Counts every position of `tokens`, using the available history
  // (shorter contexts at the start of the sequence).
  static NgramCounts count(TokenView tokens, int order, std::size_t vocab_size);

  int order() const { return order_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::uint64_t total_tokens() const;
  const Row* find(TokenView history, int level) const;
  std::size_t context_count() const;
  std::size_t entry_count() const;

  double prob(TokenView history, TokenId token, double smoothing_k) const;
  void dist(TokenView history, double smoothing_k, std::span<double> out) const;

  void write(std::ostream& out) const;
  static NgramCounts read(std::istream& in);

  bool operator==(const NgramCounts&) const = default;

 private:
  static std::uint64_t key(TokenView history, int level);

  int order_ = 0;
  std::size_t vocab_size_ = 0;
  // levels_[L]: contexts of length L.
  std::vector<std::unordered_map<std::uint64_t, Row>> levels_;
};

// Anything that assigns next-token probabilities given a history.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  virtual std::size_t vocab_size() const = 0;
  // Only the last order-1 tokens of `history` are consulted.
  virtual double prob(TokenView history, TokenId token) const = 0;
  virtual void next_token_dist(TokenView history, std::span<double> out) const = 0;

  NextTokenDist next_token_dist(TokenView history) const;
};

// Shared model trained on the public set only.
class BaseModel final : public LanguageModel {
 public:
  BaseModel(NgramCounts counts, double smoothing_k);

  std::size_t vocab_size() const override { return counts_.vocab_size(); }
  double prob(TokenView history, TokenId token) const override;
  void next_token_dist(TokenView history, std::span<double> out) const override;
  using LanguageModel::next_token_dist;

  int order() const { return counts_.order(); }
  double smoothing_k() const { return smoothing_k_; }
  const NgramCounts& counts() const { return counts_; }

  std::string serialize() const;
  static BaseModel deserialize(const std::string& bytes);

  bool operator==(const BaseModel& o) const {
    return counts_ == o.counts_ && smoothing_k_ == o.smoothing_k_;
  }

 private:
  NgramCounts counts_;
  double smoothing_k_;
};

// Per-domain expert: the frozen base interpolated with counts from one
// domain's train split,
//   p(v | ctx) = mix * p_domain(v | ctx) + (1 - mix) * p_base(v | ctx).
class Expert final : public LanguageModel {
 public:
  Expert(DomainId domain, std::shared_ptr<const BaseModel> base, NgramCounts delta,
         double mix);

  std::size_t vocab_size() const override { return base_->vocab_size(); }
  double prob(TokenView history, TokenId token) const override;
  void next_token_dist(TokenView history, std::span<double> out) const override;
  using LanguageModel::next_token_dist;

  DomainId domain() const { return domain_; }
  double mix() const { return mix_; }
  const NgramCounts& delta() const { return delta_; }
  const BaseModel& base() const { return *base_; }
  // Number of stored (context, token) delta entries.
  std::size_t delta_size() const;

  // Order, mix and delta tables; the base model is stored separately.
  std::string serialize() const;
  static Expert deserialize(const std::string& bytes,
                            std::shared_ptr<const BaseModel> base);

 private:
  DomainId domain_;
  std::shared_ptr<const BaseModel> base_;
  NgramCounts delta_;
  double mix_;
};

BaseModel train_base(TokenView public_set, std::size_t vocab_size,
                     const NgramParams& params);
Expert train_expert(std::shared_ptr<const BaseModel> base, const DomainDataset& domain,
                    const NgramParams& params);

// Sum of natural-log probabilities of `tokens`, each conditioned on the
// preceding tokens (optionally continuing after `prefix`).
double log_likelihood(const LanguageModel& model, TokenView tokens,
                      TokenView prefix = {});
double perplexity(const LanguageModel& model, TokenView tokens);

}  // namespace ifcmoe

#endif  // IFCMOE_NGRAM_H_
