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


#include "ifcmoe/corpus.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "ifcmoe/embedding.h"
#include "ifcmoe/error.h"
#include "test_support.h"

namespace ifcmoe {
namespace {

std::string words(std::string_view stem, int n) {
  std::string out;
  for (int i = 0; i < n; ++i) out += std::string(stem) + std::to_string(i % 37) + " ";
  return out;
}

std::vector<RawText> three_texts() {
  return {{"alpha", words("a", 1000), TextRole::kDomain},
          {"beta", words("b", 777), TextRole::kDomain},
          {"gamma", words("c", 503), TextRole::kDomain},
          {"pub", words("p", 400) + words("a", 50), TextRole::kPublic}};
}

TEST(TokenizeTest, LowercasesAndSplitsPunctuation) {
  EXPECT_EQ(tokenize("Hello, World!  ok"),
            (std::vector<std::string>{"hello", ",", "world", "!", "ok"}));
  EXPECT_TRUE(tokenize(" \n\t").empty());
}

TEST(VocabularyTest, UnknownIsIdZeroAndTiesAreLexicographic) {
  const std::vector<std::vector<std::string>> docs{{"b", "a", "c", "c"}};
  const Vocabulary v = Vocabulary::build(docs, 10);
  EXPECT_EQ(v.token(0), kUnknownTokenString);
  EXPECT_EQ(v.id("c"), 1u);
  EXPECT_EQ(v.id("a"), 2u);
  EXPECT_EQ(v.id("b"), 3u);
  EXPECT_EQ(v.id("zzz"), kUnknownToken);
  EXPECT_EQ(Vocabulary::build(docs, 2).size(), 2u);
}

TEST(VocabularyTest, RejectsDuplicates) {
  EXPECT_THROW(Vocabulary({"<unk>", "a", "a"}), DataError);
}

TEST(BuildCorpusTest, SplitsByFraction) {
  CorpusOptions options;
  options.seed = 7;
  const auto texts = three_texts();
  const Corpus c = build_corpus(texts, options);
  ASSERT_EQ(c.m(), 3u);
  const std::size_t lengths[] = {1000, 777, 503};
  for (std::size_t i = 0; i < 3; ++i) {
    const DomainDataset& d = c.domains[i];
    EXPECT_EQ(d.id, i + 1);
    const double n = static_cast<double>(lengths[i]);
    EXPECT_LE(std::abs(static_cast<double>(d.train.size()) - 0.8 * n), 1.0);
    EXPECT_LE(std::abs(static_cast<double>(d.heldout.size()) - 0.05 * n), 1.0);
    EXPECT_LE(std::abs(static_cast<double>(d.test.size()) - 0.15 * n), 1.0);
    EXPECT_EQ(d.train.size() + d.heldout.size() + d.test.size(), lengths[i]);
    EXPECT_EQ(d.sample_count(), d.train.size());
  }
}

TEST(BuildCorpusTest, Deterministic) {
  CorpusOptions options;
  options.seed = 7;
  const auto texts = three_texts();
  const Corpus a = build_corpus(texts, options);
  const Corpus b = build_corpus(texts, options);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.manifest_hash(), b.manifest_hash());
}

TEST(BuildCorpusTest, BadFractionsAreConfigErrors) {
  CorpusOptions options;
  options.fractions = {0.5, 0.5, 0.5};
  const auto texts = three_texts();
  EXPECT_THROW(build_corpus(texts, options), ConfigError);
  options.fractions = {1.0, 0.0, 0.0};
  EXPECT_THROW(build_corpus(texts, options), ConfigError);
}

TEST(BuildCorpusTest, EmptyTextIsDataError) {
  const std::vector<RawText> texts{{"x", "  ", TextRole::kDomain}};
  EXPECT_THROW(build_corpus(texts, CorpusOptions{}), DataError);
}

TEST(BuildCorpusTest, UnseenWordsNeverEnterTheVocabulary) {
  auto texts = three_texts();
  texts.push_back({"held", words("zebra", 300), TextRole::kUnseen});
  const Corpus c = build_corpus(texts, CorpusOptions{});
  ASSERT_EQ(c.unseen.size(), 1u);
  EXPECT_EQ(c.unseen[0].id, 4u);
  EXPECT_TRUE(c.unseen[0].unseen);
  EXPECT_EQ(c.vocabulary.id("zebra0"), kUnknownToken);
  for (TokenId t : c.unseen[0].test) EXPECT_EQ(t, kUnknownToken);
  EXPECT_EQ(&c.domain(4), &c.unseen[0]);
  EXPECT_THROW(c.domain(5), ConfigError);
}

TEST(BuildCorpusTest, HeldoutAndTestWordsNeverEnterTheVocabulary) {
  // "late" appears only past the train split of the single domain.
  std::vector<RawText> texts{{"d", words("w", 800) + words("late", 200), TextRole::kDomain}};
  const Corpus c = build_corpus(texts, CorpusOptions{});
  EXPECT_EQ(c.vocabulary.id("late0"), kUnknownToken);
}

TEST(CorpusIoTest, SaveLoadRoundTrip) {
  const Corpus& c = testing::small_corpus();
  const auto dir = testing::scratch_dir("corpus-io");
  save_corpus(c, dir);
  const Corpus loaded = load_corpus(dir);
  EXPECT_EQ(loaded, c);
  EXPECT_EQ(read_manifest_hash(dir), c.manifest_hash());
}

TEST(CorpusHashTest, ChangesWithAnySplit) {
  Corpus c = testing::small_corpus();
  const std::string h = c.manifest_hash();
  c.domains[2].test[0] ^= 1;
  EXPECT_NE(c.manifest_hash(), h);
}

TEST(SynthTest, ReconstructionIsBitExact) {
  const SynthSpec spec = testing::small_spec();
  EXPECT_EQ(synth_corpus(spec), synth_corpus(spec));
}

TEST(SynthTest, SampleCountsFollowRequestedSizes) {
  SynthSpec spec = testing::small_spec();
  spec.tokens_per_domain = {20000, 10000, 5000, 1900};
  const Corpus c = synth_corpus(spec);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(c.domains[i].sample_count(),
              static_cast<std::uint64_t>(std::llround(0.8 * spec.tokens_per_domain[i])));
  }
  EXPECT_EQ(c.sample_counts(), (std::vector<std::uint64_t>{16000, 8000, 4000, 1520}));
}

TEST(SynthTest, UnseenTokensStayOutOfTraining) {
  SynthSpec spec = testing::small_spec();
  spec.unseen = 2;
  const Corpus c = synth_corpus(spec);
  ASSERT_EQ(c.unseen.size(), 2u);
  EXPECT_EQ(c.unseen[0].id, 5u);
  // Unseen domains contribute no training data, and the seen splits are
  // the same as without them.
  const Corpus without = synth_corpus(testing::small_spec());
  EXPECT_EQ(c.domains, without.domains);
  EXPECT_EQ(c.public_set, without.public_set);
}

TEST(SynthTest, TransitionRowsAreDistributions) {
  const SyntheticSource source(testing::small_spec());
  for (DomainId d = 1; d <= 4; ++d) {
    for (TokenId prev : {TokenId{1}, TokenId{17}, TokenId{299}}) {
      double total = 0.0;
      for (TokenId next = 0; next < source.vocab_size(); ++next) {
        const double p = source.transition_prob(d, prev, next);
        EXPECT_GE(p, 0.0);
        total += p;
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
      EXPECT_EQ(source.transition_prob(d, prev, 0), 0.0);
    }
  }
}

TEST(SynthTest, EmpiricalTransitionsMatchTheGenerator) {
  const SyntheticSource source(testing::small_spec());
  const TokenSeq text = source.generate(2, 200000, 99);
  // Most frequent predecessor gives enough samples for a tight check.
  std::vector<std::size_t> freq(source.vocab_size());
  for (std::size_t i = 0; i + 1 < text.size(); ++i) ++freq[text[i]];
  const auto prev = static_cast<TokenId>(std::max_element(freq.begin(), freq.end()) - freq.begin());
  std::vector<double> counts(source.vocab_size());
  for (std::size_t i = 0; i + 1 < text.size(); ++i) {
    if (text[i] == prev) counts[text[i + 1]] += 1.0;
  }
  const double n = static_cast<double>(freq[prev]);
  for (TokenId next = 1; next < source.vocab_size(); ++next) {
    const double p = source.transition_prob(2, prev, next);
    EXPECT_NEAR(counts[next] / n, p, 5.0 * std::sqrt(p * (1 - p) / n) + 1e-3) << next;
  }
}

TEST(SynthTest, ZeroSkewMakesDomainsIdentical) {
  SynthSpec spec = testing::small_spec();
  spec.skew = 0.0;
  const SyntheticSource source(spec);
  for (TokenId prev = 1; prev < 40; ++prev) {
    for (TokenId next = 1; next < source.vocab_size(); ++next) {
      ASSERT_EQ(source.transition_prob(1, prev, next), source.transition_prob(3, prev, next));
    }
  }
}

TEST(SynthTest, DomainsAreMoreSimilarWithinThanBetween) {
  SynthSpec spec = testing::small_spec();
  spec.domains = 8;
  const Corpus c = synth_corpus(spec);
  const Embedder embedder;
  std::vector<EmbeddingVector> first;
  std::vector<EmbeddingVector> second;
  for (const DomainDataset& d : c.domains) {
    const TokenView train(d.train);
    const std::size_t half = train.size() / 2;
    first.push_back(embedder.vectorize(train.first(half)));
    second.push_back(embedder.vectorize(train.subspan(half)));
  }
  for (std::size_t i = 0; i < 8; ++i) {
    const double within = cosine_similarity(first[i], second[i]);
    for (std::size_t j = 0; j < 8; ++j) {
      if (i == j) continue;
      EXPECT_GT(within, cosine_similarity(first[i], second[j])) << i << " vs " << j;
    }
  }
}

TEST(SynthTest, InvalidSpecsAreRejected) {
  SynthSpec spec = testing::small_spec();
  spec.skew = 1.5;
  EXPECT_THROW(synth_corpus(spec), ConfigError);
  spec = testing::small_spec();
  spec.domains = 0;
  EXPECT_THROW(synth_corpus(spec), ConfigError);
  spec = testing::small_spec();
  spec.tokens_per_domain = {100, 100};
  EXPECT_THROW(synth_corpus(spec), ConfigError);
}

}  // namespace
}  // namespace ifcmoe
