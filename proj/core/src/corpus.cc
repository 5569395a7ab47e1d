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

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ifcmoe/error.h"
#include "ifcmoe/hash.h"
#include "ifcmoe/random.h"

namespace ifcmoe {

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{std::string(kUnknownTokenString)}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens)
    : tokens_(std::move(tokens)) {
  if (tokens_.empty() || tokens_[0] != kUnknownTokenString) {
    throw DataError("vocabulary must start with the unknown token");
  }
  if (tokens_.size() >= (1u << 21)) {
    throw ConfigError("vocabulary larger than 2^21 entries is not supported");
  }
  index_.reserve(tokens_.size());
  for (TokenId i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], i).second) {
      throw DataError("duplicate vocabulary entry '" + tokens_[i] + "'");
    }
  }
}

Vocabulary Vocabulary::build(std::span<const std::vector<std::string>> documents,
                             std::size_t max_size) {
  if (max_size < 2) throw ConfigError("max_vocab must be at least 2");
  std::unordered_map<std::string, std::uint64_t> freq;
  for (const auto& doc : documents) {
    for (const auto& w : doc) {
      if (w != kUnknownTokenString) ++freq[w];
    }
  }
  std::vector<std::pair<std::string, std::uint64_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > max_size - 1) ranked.resize(max_size - 1);
  std::vector<std::string> tokens;
  tokens.reserve(ranked.size() + 1);
  tokens.emplace_back(kUnknownTokenString);
  for (auto& [w, n] : ranked) tokens.push_back(std::move(w));
  return Vocabulary(std::move(tokens));
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnknownToken : it->second;
}

TokenSeq Vocabulary::encode(std::span<const std::string> words) const {
  TokenSeq out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(id(w));
  return out;
}

std::string Vocabulary::decode(TokenView ids) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += token(ids[i]);
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur += static_cast<char>(std::tolower(c));
    }
  }
  flush();
  return out;
}

void SplitFractions::validate() const {
  if (!(train > 0 && heldout > 0 && test > 0)) {
    throw ConfigError("split fractions must all be positive");
  }
  if (std::abs(train + heldout + test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
}

const DomainDataset& Corpus::domain(DomainId id) const {
  if (id >= 1 && id <= domains.size()) return domains[id - 1];
  const std::size_t u = id - domains.size();
  if (id > domains.size() && u >= 1 && u <= unseen.size()) return unseen[u - 1];
  throw ConfigError("unknown domain id " + std::to_string(id));
}

std::vector<std::uint64_t> Corpus::sample_counts() const {
  std::vector<std::uint64_t> out;
  out.reserve(domains.size());
  for (const auto& d : domains) out.push_back(d.sample_count());
  return out;
}

namespace {

void hash_tokens(Fnv1a& h, TokenView tokens) {
  h.update_u64(tokens.size());
  for (TokenId t : tokens) h.update_u64(t);
}

void hash_domain(Fnv1a& h, const DomainDataset& d) {
  h.update_u64(d.id);
  h.update(d.name);
  h.update_u64(d.unseen ? 1 : 0);
  hash_tokens(h, d.train);
  hash_tokens(h, d.heldout);
  hash_tokens(h, d.test);
}

// Sizes of the three contiguous splits of an n-token text.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitFractions& f) {
  const auto train = static_cast<std::size_t>(std::llround(n * f.train));
  const auto heldout = static_cast<std::size_t>(std::llround(n * f.heldout));
  return {train, heldout, n - std::min(n, train + heldout)};
}

DomainDataset split_domain(DomainId id, std::string name, const TokenSeq& tokens,
                           const SplitFractions& f, bool unseen) {
  const auto [ntrain, nheld, ntest] = split_sizes(tokens.size(), f);
  if (ntrain == 0 || nheld == 0 || ntest == 0) {
    throw DataError("domain '" + name + "' is too short to split (" +
                    std::to_string(tokens.size()) + " tokens)");
  }
  DomainDataset d;
  d.id = id;
  d.name = std::move(name);
  d.unseen = unseen;
  d.train.assign(tokens.begin(), tokens.begin() + ntrain);
  d.heldout.assign(tokens.begin() + ntrain, tokens.begin() + ntrain + nheld);
  d.test.assign(tokens.begin() + ntrain + nheld, tokens.end());
  return d;
}

}  // namespace

std::string Corpus::manifest_hash() const {
  Fnv1a h;
  h.update_u64(vocabulary.size());
  for (const auto& t : vocabulary.tokens()) h.update(t), h.update_u64(0);
  hash_tokens(h, public_set);
  h.update_u64(seed);
  for (const auto& d : domains) hash_domain(h, d);
  for (const auto& d : unseen) hash_domain(h, d);
  return h.hex();
}

Corpus build_corpus(std::span<const RawText> texts, const CorpusOptions& options) {
  options.fractions.validate();
  std::vector<std::vector<std::string>> words(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].text.find_first_not_of(" \t\r\n") == std::string::npos) {
      throw DataError("text for domain '" + texts[i].name + "' is empty");
    }
    words[i] = tokenize(texts[i].text);
  }

  // Vocabulary source: public text plus the train split of each seen domain.
  std::vector<std::vector<std::string>> vocab_docs;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].role == TextRole::kPublic) {
      vocab_docs.push_back(words[i]);
    } else if (texts[i].role == TextRole::kDomain) {
      const auto ntrain = split_sizes(words[i].size(), options.fractions)[0];
      vocab_docs.emplace_back(words[i].begin(), words[i].begin() + ntrain);
    }
  }

  Corpus corpus;
  corpus.seed = options.seed;
  corpus.vocabulary = Vocabulary::build(vocab_docs, options.max_vocab);
  DomainId next_id = 1;
  std::vector<std::size_t> unseen_idx;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const TokenSeq ids = corpus.vocabulary.encode(words[i]);
    switch (texts[i].role) {
      case TextRole::kPublic:
        corpus.public_set.insert(corpus.public_set.end(), ids.begin(), ids.end());
        corpus.public_sources.push_back(texts[i].name);
        break;
      case TextRole::kDomain:
        corpus.domains.push_back(
            split_domain(next_id++, texts[i].name, ids, options.fractions, false));
        break;
      case TextRole::kUnseen:
        unseen_idx.push_back(i);
        break;
    }
  }
  if (corpus.domains.empty()) throw ConfigError("corpus needs at least one seen domain");
  for (std::size_t i : unseen_idx) {
    corpus.unseen.push_back(split_domain(next_id++, texts[i].name,
                                         corpus.vocabulary.encode(words[i]),
                                         options.fractions, true));
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Synthetic corpora

namespace {

constexpr double kSuccessorWeights[3] = {0.5, 0.3, 0.2};
constexpr double kZipfExponent = 1.0;
constexpr double kPublicTopicRate = 0.25;

}  // namespace

SyntheticSource::SyntheticSource(SynthSpec spec) : spec_(std::move(spec)) {
  if (spec_.vocab_size < 2) throw ConfigError("vocab_size must be at least 2");
  if (spec_.domains < 1) throw ConfigError("synthetic corpus needs m >= 1");
  if (spec_.skew < 0.0 || spec_.skew > 1.0) throw ConfigError("skew must be in [0, 1]");
  if (spec_.group_share < 0.0 || spec_.group_share > 1.0) {
    throw ConfigError("group_share must be in [0, 1]");
  }
  if (!spec_.tokens_per_domain.empty() &&
      spec_.tokens_per_domain.size() != spec_.domains) {
    throw ConfigError("tokens_per_domain must list one size per domain");
  }
  if (spec_.tokens_per_domain.empty()) {
    spec_.tokens_per_domain.assign(spec_.domains, spec_.default_tokens);
  }
  for (std::size_t n : spec_.tokens_per_domain) {
    if (n < 100) throw ConfigError("synthetic domains need at least 100 tokens");
  }
  spec_.fractions.validate();
  if (spec_.groups == 0) spec_.groups = (spec_.domains + 3) / 4;

  const std::size_t v = spec_.vocab_size;
  const std::size_t n_dom = domain_count();
  group_.resize(n_dom);
  for (std::size_t i = 0; i < n_dom; ++i) group_[i] = i % spec_.groups;

  Rng rng(derive_seed(spec_.seed, 1));
  // Token ids 1..v; id 0 is reserved for the unknown token.
  std::vector<TokenId> perm(v);
  for (std::size_t i = 0; i < v; ++i) perm[i] = static_cast<TokenId>(i + 1);
  rng.shuffle(perm);
  background_rank_ = perm;
  background_cdf_.resize(v);
  double acc = 0.0;
  for (std::size_t r = 0; r < v; ++r) {
    acc += 1.0 / std::pow(static_cast<double>(r + 1), kZipfExponent);
    background_cdf_[r] = acc;
  }

  // Topic pools are disjoint slices of a second permutation, wrapping when
  // the vocabulary is too small to keep them apart.
  std::vector<TokenId> pool_perm = perm;
  rng.shuffle(pool_perm);
  const std::size_t group_pool =
      std::clamp<std::size_t>(v / 4 / spec_.groups, 2, 40);
  const std::size_t own_pool = std::clamp<std::size_t>(v / 2 / n_dom, 2, 24);
  std::size_t cursor = 0;
  auto take = [&](std::size_t n) {
    std::vector<TokenId> out(n);
    for (auto& t : out) t = pool_perm[cursor++ % v];
    return out;
  };
  std::vector<std::vector<TokenId>> group_pools(spec_.groups);
  for (auto& p : group_pools) p = take(group_pool);
  std::vector<std::vector<TokenId>> own_pools(n_dom);
  for (auto& p : own_pools) p = take(own_pool);

  auto fill = [&](const std::vector<TokenId>& pool, std::uint64_t stream) {
    std::vector<std::vector<TokenId>> table(v + 1);
    Rng r(derive_seed(spec_.seed, stream));
    for (auto& succ : table) {
      succ.resize(3);
      for (auto& t : succ) t = pool[r.index(pool.size())];
    }
    return table;
  };
  group_succ_.reserve(spec_.groups);
  for (std::size_t g = 0; g < spec_.groups; ++g) {
    group_succ_.push_back(fill(group_pools[g], 1000 + g));
  }
  own_succ_.reserve(n_dom);
  for (std::size_t d = 0; d < n_dom; ++d) {
    own_succ_.push_back(fill(own_pools[d], 100000 + d));
  }
}

TokenId SyntheticSource::draw_background(double u) const {
  const double x = u * background_cdf_.back();
  auto it = std::upper_bound(background_cdf_.begin(), background_cdf_.end(), x);
  if (it == background_cdf_.end()) --it;
  return background_rank_[it - background_cdf_.begin()];
}

const std::vector<TokenId>& SyntheticSource::group_successors(std::size_t group,
                                                              TokenId prev) const {
  return group_succ_[group][prev];
}

const std::vector<TokenId>& SyntheticSource::own_successors(DomainId id,
                                                            TokenId prev) const {
  return own_succ_[id - 1][prev];
}

namespace {

TokenId pick_successor(const std::vector<TokenId>& succ, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i < succ.size(); ++i) {
    acc += kSuccessorWeights[i];
    if (u < acc) return succ[i];
  }
  return succ.back();
}

}  // namespace

TokenId SyntheticSource::next_token(DomainId id, TokenId prev, std::uint64_t draw,
                                    std::uint64_t draw2, std::uint64_t draw3) const {
  if (unit_double(draw) >= spec_.skew) return draw_background(unit_double(draw2));
  const bool use_group = unit_double(draw2) < spec_.group_share;
  const auto& succ = use_group ? group_successors(group_of(id), prev)
                               : own_successors(id, prev);
  return pick_successor(succ, unit_double(draw3));
}

TokenSeq SyntheticSource::generate(DomainId id, std::size_t length,
                                   std::uint64_t seed) const {
  if (id < 1 || id > domain_count()) {
    throw ConfigError("unknown synthetic domain " + std::to_string(id));
  }
  Rng rng(seed);
  TokenSeq out;
  out.reserve(length);
  TokenId prev = draw_background(rng.uniform());
  for (std::size_t i = 0; i < length; ++i) {
    const auto a = rng.next();
    const auto b = rng.next();
    const auto c = rng.next();
    prev = next_token(id, prev, a, b, c);
    out.push_back(prev);
  }
  return out;
}

TokenSeq SyntheticSource::generate_public(std::size_t length, std::uint64_t seed) const {
  Rng rng(seed);
  TokenSeq out;
  out.reserve(length);
  TokenId prev = draw_background(rng.uniform());
  for (std::size_t i = 0; i < length; ++i) {
    if (rng.uniform() < kPublicTopicRate) {
      const std::size_t g = rng.index(spec_.groups);
      prev = pick_successor(group_successors(g, prev), rng.uniform());
    } else {
      prev = draw_background(rng.uniform());
    }
    out.push_back(prev);
  }
  return out;
}

double SyntheticSource::transition_prob(DomainId id, TokenId prev, TokenId next) const {
  double background = 0.0;
  if (next >= 1) {
    const std::size_t rank =
        std::find(background_rank_.begin(), background_rank_.end(), next) -
        background_rank_.begin();
    if (rank < background_rank_.size()) {
      const double prev_cdf = rank == 0 ? 0.0 : background_cdf_[rank - 1];
      background = (background_cdf_[rank] - prev_cdf) / background_cdf_.back();
    }
  }
  double topic = 0.0;
  const auto& g = group_successors(group_of(id), prev);
  const auto& o = own_successors(id, prev);
  for (std::size_t i = 0; i < 3; ++i) {
    if (g[i] == next) topic += spec_.group_share * kSuccessorWeights[i];
    if (o[i] == next) topic += (1.0 - spec_.group_share) * kSuccessorWeights[i];
  }
  return (1.0 - spec_.skew) * background + spec_.skew * topic;
}

Vocabulary SyntheticSource::vocabulary() const {
  std::vector<std::string> tokens;
  tokens.reserve(spec_.vocab_size + 1);
  tokens.emplace_back(kUnknownTokenString);
  for (std::size_t i = 1; i <= spec_.vocab_size; ++i) {
    tokens.push_back("t" + std::to_string(i));
  }
  return Vocabulary(std::move(tokens));
}

Corpus SyntheticSource::corpus() const {
  Corpus corpus;
  corpus.seed = spec_.seed;
  corpus.vocabulary = vocabulary();
  corpus.public_set = generate_public(spec_.public_tokens, derive_seed(spec_.seed, 7));
  corpus.public_sources.push_back("synthetic-public");
  for (DomainId id = 1; id <= domain_count(); ++id) {
    const bool unseen = id > spec_.domains;
    const std::size_t n =
        unseen ? spec_.unseen_tokens : spec_.tokens_per_domain[id - 1];
    const TokenSeq tokens = generate(id, n, derive_seed(spec_.seed, 10000 + id));
    auto d = split_domain(id, (unseen ? "unseen" : "domain") + std::to_string(id),
                          tokens, spec_.fractions, unseen);
    (unseen ? corpus.unseen : corpus.domains).push_back(std::move(d));
  }
  return corpus;
}

Corpus synth_corpus(const SynthSpec& spec) { return SyntheticSource(spec).corpus(); }

// ---------------------------------------------------------------------------
// Persistence

namespace fs = std::filesystem;

namespace {

void write_tokens(const fs::path& path, const Vocabulary& vocab, TokenView tokens) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << vocab.decode(tokens) << '\n';
}

TokenSeq read_tokens(const fs::path& path, const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  TokenSeq out;
  std::string word;
  while (in >> word) out.push_back(vocab.id(word));
  return out;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace

void save_corpus(const Corpus& corpus, const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "vocab.txt", std::ios::binary);
    for (const auto& t : corpus.vocabulary.tokens()) out << t << '\n';
  }
  write_tokens(dir / "public.txt", corpus.vocabulary, corpus.public_set);
  nlohmann::json manifest;
  manifest["format"] = "ifcmoe-corpus/1";
  manifest["seed"] = corpus.seed;
  manifest["vocab_size"] = corpus.vocabulary.size();
  manifest["public_tokens"] = corpus.public_set.size();
  manifest["public_sources"] = corpus.public_sources;
  nlohmann::json domains = nlohmann::json::array();
  auto emit = [&](const DomainDataset& d) {
    const fs::path sub = dir / ("domain_" + std::to_string(d.id));
    fs::create_directories(sub);
    write_tokens(sub / "train.txt", corpus.vocabulary, d.train);
    write_tokens(sub / "heldout.txt", corpus.vocabulary, d.heldout);
    write_tokens(sub / "test.txt", corpus.vocabulary, d.test);
    domains.push_back({{"id", d.id},
                       {"name", d.name},
                       {"unseen", d.unseen},
                       {"count", d.sample_count()},
                       {"heldout", d.heldout.size()},
                       {"test", d.test.size()}});
  };
  for (const auto& d : corpus.domains) emit(d);
  for (const auto& d : corpus.unseen) emit(d);
  manifest["domains"] = std::move(domains);
  manifest["hash"] = corpus.manifest_hash();
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
}

Corpus load_corpus(const fs::path& dir) {
  const auto manifest = read_json(dir / "manifest.json");
  if (manifest.value("format", "") != "ifcmoe-corpus/1") {
    throw DataError(dir.string() + ": not an ifcmoe corpus manifest");
  }
  Corpus corpus;
  {
    std::ifstream in(dir / "vocab.txt", std::ios::binary);
    if (!in) throw DataError("cannot read vocab.txt in " + dir.string());
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) tokens.push_back(line);
    corpus.vocabulary = Vocabulary(std::move(tokens));
  }
  corpus.seed = manifest.at("seed").get<std::uint64_t>();
  corpus.public_set = read_tokens(dir / "public.txt", corpus.vocabulary);
  corpus.public_sources = manifest.at("public_sources").get<std::vector<std::string>>();
  for (const auto& entry : manifest.at("domains")) {
    DomainDataset d;
    d.id = entry.at("id").get<DomainId>();
    d.name = entry.at("name").get<std::string>();
    d.unseen = entry.at("unseen").get<bool>();
    const fs::path sub = dir / ("domain_" + std::to_string(d.id));
    d.train = read_tokens(sub / "train.txt", corpus.vocabulary);
    d.heldout = read_tokens(sub / "heldout.txt", corpus.vocabulary);
    d.test = read_tokens(sub / "test.txt", corpus.vocabulary);
    if (d.sample_count() != entry.at("count").get<std::uint64_t>()) {
      throw DataError("domain " + std::to_string(d.id) + " count disagrees with manifest");
    }
    (d.unseen ? corpus.unseen : corpus.domains).push_back(std::move(d));
  }
  for (std::size_t i = 0; i < corpus.domains.size(); ++i) {
    if (corpus.domains[i].id != i + 1) throw DataError("seen domain ids must be 1..m");
  }
  const std::string recorded = manifest.at("hash").get<std::string>();
  if (corpus.manifest_hash() != recorded) {
    throw StaleArtifact(dir.string() + ": corpus files do not match manifest hash " +
                        recorded + "; rebuild with build-corpus");
  }
  return corpus;
}

std::string read_manifest_hash(const fs::path& dir) {
  return read_json(dir / "manifest.json").at("hash").get<std::string>();
}

}  // namespace ifcmoe
