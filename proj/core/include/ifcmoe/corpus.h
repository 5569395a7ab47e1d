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

#ifndef IFCMOE_CORPUS_H_
#define IFCMOE_CORPUS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ifcmoe/types.h"

namespace ifcmoe {

inline constexpr std::string_view kUnknownTokenString = "<unk>";

// Ordered token-string table. Id 0 is always the unknown token.
class Vocabulary {
 public:
  Vocabulary();
  // `tokens[0]` must be the unknown-token string; duplicates are rejected.
  explicit Vocabulary(std::vector<std::string> tokens);

  // Frequency-ranked vocabulary over the given documents, capped at
  // `max_size` entries including the unknown token. Ties break
  // lexicographically so the result is independent of document order.
  static Vocabulary build(std::span<const std::vector<std::string>> documents,
                          std::size_t max_size);

  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  TokenSeq encode(std::span<const std::string> words) const;
  std::string decode(TokenView ids) const;

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Lowercases ASCII, splits on whitespace, and emits every punctuation
// character as its own token.
std::vector<std::string> tokenize(std::string_view text);

struct SplitFractions {
  double train = 0.8;
  double heldout = 0.05;
  double test = 0.15;

  // Throws ConfigError unless all fractions are positive and sum to 1.
  void validate() const;
};

struct DomainDataset {
  DomainId id = 0;
  std::string name;
  TokenSeq train;
  TokenSeq heldout;
  TokenSeq test;
  bool unseen = false;

  // count(d_j): the number of training tokens. Declared public metadata.
  std::uint64_t sample_count() const { return train.size(); }

  bool operator==(const DomainDataset&) const = default;
};

struct Corpus {
  Vocabulary vocabulary;
  TokenSeq public_set;
  // Names of the raw texts that contributed to `public_set`.
  std::vector<std::string> public_sources;
  // Seen domains, ids 1..m in order.
  std::vector<DomainDataset> domains;
  // Evaluation-only domains, ids m+1.. in order. Never used for training.
  std::vector<DomainDataset> unseen;
  std::uint64_t seed = 0;

  std::size_t m() const { return domains.size(); }
  // Seen or unseen domain by id. Throws ConfigError on an unknown id.
  const DomainDataset& domain(DomainId id) const;
  std::vector<std::uint64_t> sample_counts() const;

  // Digest over the vocabulary, public set and every split; artifacts
  // record it to detect staleness.
  std::string manifest_hash() const;

  bool operator==(const Corpus&) const = default;
};

enum class TextRole { kDomain, kUnseen, kPublic };

struct RawText {
  std::string name;
  std::string text;
  TextRole role = TextRole::kDomain;
};

struct CorpusOptions {
  SplitFractions fractions;
  std::uint64_t seed = 0;
  std::size_t max_vocab = 50000;
};

// Tokenizes and splits each domain text contiguously into
// train/heldout/test. The vocabulary covers the public set and the seen
// train splits; everything else maps unknown words to the unknown id.
Corpus build_corpus(std::span<const RawText> texts,
                    const CorpusOptions& options);

// Generator parameters for a desk-scale multi-domain corpus.
struct SynthSpec {
  std::size_t domains = 8;
  // Total tokens per seen domain (all three splits). Empty means
  // `default_tokens` for every domain.
  std::vector<std::size_t> tokens_per_domain;
  std::size_t default_tokens = 12000;
  std::size_t vocab_size = 1000;
  // Probability of drawing from the domain's topic component instead of
  // the shared background distribution. 0 makes all domains identical.
  double skew = 0.4;
  // Topic groups; domains in a group share part of their transitions.
  // 0 picks ceil(domains / 4).
  std::size_t groups = 0;
  // Fraction of topic draws taken from the group table rather than the
  // domain's own table.
  double group_share = 0.5;
  std::size_t unseen = 0;
  std::size_t unseen_tokens = 6000;
  std::size_t public_tokens = 20000;
  SplitFractions fractions;
  std::uint64_t seed = 1;
};

// Stochastic source behind synth_corpus. Each domain is a first-order
// Markov mixture: with probability `skew` the next token follows the
// domain's (or its group's) successor table, otherwise it is drawn from
// the shared Zipf background.
class SyntheticSource {
 public:
  explicit SyntheticSource(SynthSpec spec);

  const SynthSpec& spec() const { return spec_; }
  // Seen domains are 1..m, unseen m+1..m+u.
  std::size_t domain_count() const { return spec_.domains + spec_.unseen; }
  std::size_t group_of(DomainId id) const { return group_.at(id - 1); }
  std::size_t vocab_size() const { return spec_.vocab_size + 1; }

  TokenSeq generate(DomainId id, std::size_t length, std::uint64_t seed) const;
  TokenSeq generate_public(std::size_t length, std::uint64_t seed) const;

  // Exact transition probability of the generator; an independent oracle
  // for model-quality checks.
  double transition_prob(DomainId id, TokenId prev, TokenId next) const;

  Vocabulary vocabulary() const;
  Corpus corpus() const;

 private:
  struct Successors {
    std::vector<TokenId> group;
    std::vector<TokenId> own;
  };
  TokenId draw_background(double u) const;
  TokenId next_token(DomainId id, TokenId prev, std::uint64_t draw,
                     std::uint64_t draw2, std::uint64_t draw3) const;
  const std::vector<TokenId>& group_successors(std::size_t group,
                                               TokenId prev) const;
  const std::vector<TokenId>& own_successors(DomainId id, TokenId prev) const;

  SynthSpec spec_;
  std::vector<std::size_t> group_;
  std::vector<double> background_cdf_;
  std::vector<TokenId> background_rank_;  // rank -> token id
  // [group][prev] and [domain-1][prev] successor lists.
  std::vector<std::vector<std::vector<TokenId>>> group_succ_;
  std::vector<std::vector<std::vector<TokenId>>> own_succ_;
};

Corpus synth_corpus(const SynthSpec& spec);

// On-disk layout: manifest.json, vocab.txt, public.txt and one
// domain_<id>/ directory holding train.txt, heldout.txt, test.txt.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& dir);
// Reads only the hash recorded in a corpus manifest.
std::string read_manifest_hash(const std::filesystem::path& dir);

}  // namespace ifcmoe

#endif  // IFCMOE_CORPUS_H_
