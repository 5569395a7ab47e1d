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

#include "ifcmoe/ngram.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "ifcmoe/error.h"
#include "ifcmoe/textio.h"

namespace ifcmoe {

namespace {

constexpr int kMaxOrder = 4;
constexpr int kKeyBits = 21;
constexpr std::string_view kNgramFormat = "ifcmoe-ngram/1";

}  // namespace

void NgramParams::validate() const {
  if (order < 1 || order > kMaxOrder) {
    throw ConfigError("n-gram order must be in 1.." + std::to_string(kMaxOrder));
  }
  if (!(smoothing_k >= 0.0) || !std::isfinite(smoothing_k)) {
    throw ConfigError("smoothing_k must be a finite non-negative number");
  }
  if (!(mix >= 0.0 && mix <= 1.0)) throw ConfigError("mix must be in [0, 1]");
}

std::uint32_t NgramCounts::Row::count(TokenId t) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), t,
                             [](const auto& e, TokenId v) { return e.first < v; });
  return (it != entries.end() && it->first == t) ? it->second : 0;
}

NgramCounts::NgramCounts(int order, std::size_t vocab_size)
    : order_(order), vocab_size_(vocab_size), levels_(order) {}

std::uint64_t NgramCounts::key(TokenView history, int level) {
  std::uint64_t k = 0;
  const std::size_t n = history.size();
  for (int i = 0; i < level; ++i) {
    k |= static_cast<std::uint64_t>(history[n - 1 - i]) << (kKeyBits * i);
  }
  return k;
}

NgramCounts NgramCounts::count(TokenView tokens, int order, std::size_t vocab_size) {
  if (order < 1 || order > kMaxOrder) throw ConfigError("unsupported n-gram order");
  NgramCounts out(order, vocab_size);
  std::vector<std::unordered_map<std::uint64_t, std::map<TokenId, std::uint32_t>>> raw(order);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const TokenId t = tokens[i] < vocab_size ? tokens[i] : kUnknownToken;
    const TokenView history = tokens.subspan(0, i);
    const int max_level = static_cast<int>(std::min<std::size_t>(order - 1, i));
    for (int level = 0; level <= max_level; ++level) {
      ++raw[level][key(history, level)][t];
    }
  }
  for (int level = 0; level < order; ++level) {
    auto& dst = out.levels_[level];
    dst.reserve(raw[level].size());
    for (auto& [k, counts] : raw[level]) {
      Row row;
      row.entries.assign(counts.begin(), counts.end());
      for (const auto& e : row.entries) row.total += e.second;
      dst.emplace(k, std::move(row));
    }
  }
  return out;
}

std::uint64_t NgramCounts::total_tokens() const {
  if (levels_.empty()) return 0;
  auto it = levels_[0].find(0);
  return it == levels_[0].end() ? 0 : it->second.total;
}

std::size_t NgramCounts::entry_count() const {
  std::size_t n = 0;
  for (const auto& level : levels_) {
    for (const auto& [k, row] : level) n += row.entries.size();
  }
  return n;
}

std::size_t NgramCounts::context_count() const {
  std::size_t n = 0;
  for (const auto& level : levels_) n += level.size();
  return n;
}

const NgramCounts::Row* NgramCounts::find(TokenView history, int level) const {
  if (level >= order_ || static_cast<std::size_t>(level) > history.size()) return nullptr;
  for (std::size_t i = history.size() - level; i < history.size(); ++i) {
    if (history[i] >= vocab_size_) return nullptr;
  }
  const auto& map = levels_[level];
  auto it = map.find(key(history, level));
  return it == map.end() ? nullptr : &it->second;
}

double NgramCounts::prob(TokenView history, TokenId token, double smoothing_k) const {
  if (token >= vocab_size_) token = kUnknownToken;
  const double v = static_cast<double>(vocab_size_);
  const double alpha = smoothing_k * v;
  double p = 1.0 / v;
  const int max_level = static_cast<int>(std::min<std::size_t>(order_ - 1, history.size()));
  for (int level = 0; level <= max_level; ++level) {
    const Row* row = find(history, level);
    if (row == nullptr) continue;
    const double denom = static_cast<double>(row->total) + alpha;
    p = (static_cast<double>(row->count(token)) + alpha * p) / denom;
  }
  return p;
}

void NgramCounts::dist(TokenView history, double smoothing_k, std::span<double> out) const {
  if (out.size() != vocab_size_) throw ConfigError("distribution buffer has wrong size");
  const double v = static_cast<double>(vocab_size_);
  const double alpha = smoothing_k * v;
  std::fill(out.begin(), out.end(), 1.0 / v);
  const int max_level = static_cast<int>(std::min<std::size_t>(order_ - 1, history.size()));
  for (int level = 0; level <= max_level; ++level) {
    const Row* row = find(history, level);
    if (row == nullptr) continue;
    const double denom = static_cast<double>(row->total) + alpha;
    auto e = row->entries.begin();
    const auto end = row->entries.end();
    for (std::size_t t = 0; t < out.size(); ++t) {
      std::uint32_t c = 0;
      if (e != end && e->first == t) c = (e++)->second;
      out[t] = (static_cast<double>(c) + alpha * out[t]) / denom;
    }
  }
}

void NgramCounts::write(std::ostream& out) const {
  out << "order " << order_ << '\n' << "vocab " << vocab_size_ << '\n';
  for (int level = 0; level < order_; ++level) {
    std::vector<std::uint64_t> keys;
    keys.reserve(levels_[level].size());
    for (const auto& [k, row] : levels_[level]) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    out << "level " << level << ' ' << keys.size() << '\n';
    for (std::uint64_t k : keys) {
      const Row& row = levels_[level].at(k);
      out << k << ' ' << row.entries.size();
      for (const auto& [t, c] : row.entries) out << ' ' << t << ':' << c;
      out << '\n';
    }
  }
}

NgramCounts NgramCounts::read(std::istream& in) {
  int order = 0;
  std::size_t vocab = 0;
  expect_keyword(in, "order");
  in >> order;
  expect_keyword(in, "vocab");
  in >> vocab;
  if (!in || order < 1 || order > kMaxOrder) throw DataError("bad n-gram header");
  NgramCounts out(order, vocab);
  for (int level = 0; level < order; ++level) {
    int got = -1;
    std::size_t rows = 0;
    expect_keyword(in, "level");
    in >> got >> rows;
    if (!in || got != level) throw DataError("bad n-gram level header");
    auto& map = out.levels_[level];
    map.reserve(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      std::uint64_t k = 0;
      std::size_t n = 0;
      in >> k >> n;
      Row row;
      row.entries.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        TokenId t = 0;
        char colon = 0;
        std::uint32_t c = 0;
        in >> t >> colon >> c;
        if (colon != ':') throw DataError("bad n-gram entry");
        row.entries.emplace_back(t, c);
        row.total += c;
      }
      if (!in) throw DataError("truncated n-gram table");
      map.emplace(k, std::move(row));
    }
  }
  return out;
}

NextTokenDist LanguageModel::next_token_dist(TokenView history) const {
  NextTokenDist d;
  d.probs.resize(vocab_size());
  next_token_dist(history, d.probs);
  return d;
}

BaseModel::BaseModel(NgramCounts counts, double smoothing_k)
    : counts_(std::move(counts)), smoothing_k_(smoothing_k) {}

double BaseModel::prob(TokenView history, TokenId token) const {
  return counts_.prob(history, token, smoothing_k_);
}

void BaseModel::next_token_dist(TokenView history, std::span<double> out) const {
  counts_.dist(history, smoothing_k_, out);
}

std::string BaseModel::serialize() const {
  std::ostringstream out;
  out << kNgramFormat << '\n' << "kind base\n"
      << "smoothing_k " << format_double(smoothing_k_) << '\n';
  counts_.write(out);
  return out.str();
}

BaseModel BaseModel::deserialize(const std::string& bytes) {
  std::istringstream in(bytes);
  expect_keyword(in, kNgramFormat);
  expect_keyword(in, "kind");
  expect_keyword(in, "base");
  expect_keyword(in, "smoothing_k");
  const double k = read_double(in);
  return BaseModel(NgramCounts::read(in), k);
}

Expert::Expert(DomainId domain, std::shared_ptr<const BaseModel> base, NgramCounts delta,
               double mix)
    : domain_(domain), base_(std::move(base)), delta_(std::move(delta)), mix_(mix) {
  if (!base_) throw ConfigError("expert needs a base model");
  if (!(mix_ >= 0.0 && mix_ <= 1.0)) throw ConfigError("mix must be in [0, 1]");
  if (delta_.vocab_size() != base_->vocab_size() || delta_.order() != base_->order()) {
    throw DataError("expert delta does not match the base model shape");
  }
}

double Expert::prob(TokenView history, TokenId token) const {
  const double pd = delta_.prob(history, token, base_->smoothing_k());
  const double pb = base_->prob(history, token);
  return mix_ * pd + (1.0 - mix_) * pb;
}

void Expert::next_token_dist(TokenView history, std::span<double> out) const {
  thread_local std::vector<double> base_buf;
  base_buf.resize(out.size());
  delta_.dist(history, base_->smoothing_k(), out);
  base_->next_token_dist(history, base_buf);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double pd = out[i];
    const double pb = base_buf[i];
    out[i] = mix_ * pd + (1.0 - mix_) * pb;
  }
}

std::size_t Expert::delta_size() const { return delta_.entry_count(); }

std::string Expert::serialize() const {
  std::ostringstream out;
  out << kNgramFormat << '\n' << "kind expert\n"
      << "domain " << domain_ << '\n'
      << "mix " << format_double(mix_) << '\n';
  delta_.write(out);
  return out.str();
}

Expert Expert::deserialize(const std::string& bytes, std::shared_ptr<const BaseModel> base) {
  std::istringstream in(bytes);
  expect_keyword(in, kNgramFormat);
  expect_keyword(in, "kind");
  expect_keyword(in, "expert");
  expect_keyword(in, "domain");
  DomainId id = 0;
  in >> id;
  expect_keyword(in, "mix");
  const double mix = read_double(in);
  return Expert(id, std::move(base), NgramCounts::read(in), mix);
}

BaseModel train_base(TokenView public_set, std::size_t vocab_size, const NgramParams& params) {
  params.validate();
  if (public_set.empty()) throw DataError("public set is empty; cannot train the base model");
  return BaseModel(NgramCounts::count(public_set, params.order, vocab_size),
                   params.smoothing_k);
}

Expert train_expert(std::shared_ptr<const BaseModel> base, const DomainDataset& domain,
                    const NgramParams& params) {
  params.validate();
  if (!base) throw ConfigError("train_expert needs a base model");
  if (domain.train.empty()) {
    throw DataError("domain " + std::to_string(domain.id) + " has an empty train split");
  }
  auto delta = NgramCounts::count(domain.train, base->order(), base->vocab_size());
  return Expert(domain.id, std::move(base), std::move(delta), params.mix);
}

double log_likelihood(const LanguageModel& model, TokenView tokens, TokenView prefix) {
  if (tokens.empty()) throw DataError("log_likelihood of an empty sequence");
  TokenSeq history(prefix.begin(), prefix.end());
  history.reserve(prefix.size() + tokens.size());
  double sum = 0.0;
  for (TokenId t : tokens) {
    sum += std::log(model.prob(history, t));
    history.push_back(t);
  }
  return sum;
}

double perplexity(const LanguageModel& model, TokenView tokens) {
  if (tokens.empty()) throw DataError("perplexity of an empty sequence");
  return std::exp(-log_likelihood(model, tokens) / static_cast<double>(tokens.size()));
}

}  // namespace ifcmoe
