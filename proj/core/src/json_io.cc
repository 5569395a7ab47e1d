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

#include "json_io.h"

#include <string>
#include <type_traits>

#include "ifcmoe/error.h"

namespace ifcmoe::json_io {

namespace {

template <typename T>
void get(const json& j, const char* key, T& out, std::string_view where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
    if (!it->is_number_unsigned()) {
      throw ConfigError(std::string(where) + "." + key + " must be a non-negative integer");
    }
  }
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(where) + "." + key + " has the wrong type");
  }
}

std::string get_string(const json& j, const char* key, std::string_view where,
                       const std::string& fallback) {
  std::string v = fallback;
  get(j, key, v, where);
  return v;
}

std::string sub(std::string_view where, const char* key) {
  return std::string(where) + "." + key;
}

void require_object(const json& j, std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
}

}  // namespace

void check_keys(const json& j, std::initializer_list<std::string_view> allowed,
                std::string_view where) {
  require_object(j, where);
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (std::string_view a : allowed) ok = ok || a == it.key();
    if (!ok) throw ConfigError("unknown key '" + std::string(where) + "." + it.key() + "'");
  }
}

json to_json(const NgramParams& p) {
  return {{"order", p.order}, {"smoothing_k", p.smoothing_k}, {"mix", p.mix}};
}

json to_json(const EmbeddingParams& p) {
  return {{"dim", p.dim},
          {"seed", p.seed},
          {"hashes_per_token", p.hashes_per_token},
          {"domain_cap", p.domain_cap}};
}

json to_json(const TrainConfig& c) {
  return {{"expert", to_json(c.ngram)},
          {"embedding", to_json(c.embedding)},
          {"heldout_cap", c.heldout_cap},
          {"clusters", c.clusters},
          {"cluster_seed", c.cluster_seed},
          {"kmeans_iterations", c.kmeans_iterations}};
}

json to_json(const GateConfig& g) {
  return {{"k", g.k}, {"r", g.r}, {"c", g.c}, {"s", g.s}, {"lambda", g.lambda}};
}

json to_json(const EngineConfig& e) {
  return {{"backend", std::string(to_string(e.backend))},
          {"strict_ni", e.strict},
          {"cluster_source", std::string(to_string(e.cluster_source))},
          {"size_denominator", e.size_denominator == SizeDenominator::kAll ? "all" : "accessible"},
          {"evidence", e.evidence == EvidenceWindow::kSession ? "session" : "per-gate"},
          {"label_fallback", e.label_fallback},
          {"overlap_regating", e.overlap_regating},
          {"parallel_experts", e.parallel_experts}};
}

json to_json(const SplitFractions& f) { return json::array({f.train, f.heldout, f.test}); }

json to_json(const SynthSpec& s) {
  return {{"domains", s.domains},
          {"tokens_per_domain", s.tokens_per_domain},
          {"default_tokens", s.default_tokens},
          {"vocab_size", s.vocab_size},
          {"skew", s.skew},
          {"groups", s.groups},
          {"group_share", s.group_share},
          {"unseen", s.unseen},
          {"unseen_tokens", s.unseen_tokens},
          {"public_tokens", s.public_tokens},
          {"fractions", to_json(s.fractions)},
          {"seed", s.seed}};
}

void read(const json& j, NgramParams& out, std::string_view where) {
  check_keys(j, {"order", "smoothing_k", "mix"}, where);
  get(j, "order", out.order, where);
  get(j, "smoothing_k", out.smoothing_k, where);
  get(j, "mix", out.mix, where);
}

void read(const json& j, EmbeddingParams& out, std::string_view where) {
  check_keys(j, {"dim", "seed", "hashes_per_token", "domain_cap"}, where);
  get(j, "dim", out.dim, where);
  get(j, "seed", out.seed, where);
  get(j, "hashes_per_token", out.hashes_per_token, where);
  get(j, "domain_cap", out.domain_cap, where);
}

void read(const json& j, TrainConfig& out, std::string_view where) {
  check_keys(j,
             {"expert", "embedding", "heldout_cap", "clusters", "cluster_seed",
              "kmeans_iterations"},
             where);
  if (j.contains("expert")) read(j["expert"], out.ngram, sub(where, "expert"));
  if (j.contains("embedding")) read(j["embedding"], out.embedding, sub(where, "embedding"));
  get(j, "heldout_cap", out.heldout_cap, where);
  get(j, "clusters", out.clusters, where);
  get(j, "cluster_seed", out.cluster_seed, where);
  get(j, "kmeans_iterations", out.kmeans_iterations, where);
}

void read(const json& j, GateConfig& out, std::string_view where) {
  check_keys(j, {"k", "r", "c", "s", "lambda"}, where);
  get(j, "k", out.k, where);
  get(j, "r", out.r, where);
  get(j, "c", out.c, where);
  get(j, "s", out.s, where);
  get(j, "lambda", out.lambda, where);
}

void read(const json& j, EngineConfig& out, std::string_view where) {
  check_keys(j,
             {"backend", "strict_ni", "cluster_source", "size_denominator", "evidence",
              "label_fallback", "overlap_regating", "parallel_experts"},
             where);
  out.backend = parse_backend(get_string(j, "backend", where, std::string(to_string(out.backend))));
  get(j, "strict_ni", out.strict, where);
  out.cluster_source = parse_cluster_source(
      get_string(j, "cluster_source", where, std::string(to_string(out.cluster_source))));
  const std::string denom = get_string(
      j, "size_denominator", where,
      out.size_denominator == SizeDenominator::kAll ? "all" : "accessible");
  if (denom == "all") {
    out.size_denominator = SizeDenominator::kAll;
  } else if (denom == "accessible") {
    out.size_denominator = SizeDenominator::kAccessible;
  } else {
    throw ConfigError(std::string(where) + ".size_denominator must be all or accessible");
  }
  const std::string evidence = get_string(
      j, "evidence", where, out.evidence == EvidenceWindow::kSession ? "session" : "per-gate");
  if (evidence == "session") {
    out.evidence = EvidenceWindow::kSession;
  } else if (evidence == "per-gate") {
    out.evidence = EvidenceWindow::kPerGate;
  } else {
    throw ConfigError(std::string(where) + ".evidence must be per-gate or session");
  }
  get(j, "label_fallback", out.label_fallback, where);
  get(j, "overlap_regating", out.overlap_regating, where);
  get(j, "parallel_experts", out.parallel_experts, where);
}

void read(const json& j, SplitFractions& out, std::string_view where) {
  if (!j.is_array() || j.size() != 3) {
    throw ConfigError(std::string(where) + " must be [train, heldout, test]");
  }
  try {
    out = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  } catch (const json::exception&) {
    throw ConfigError(std::string(where) + " must hold three numbers");
  }
}

void read(const json& j, SynthSpec& out, std::string_view where) {
  check_keys(j,
             {"domains", "tokens_per_domain", "default_tokens", "vocab_size", "skew", "groups",
              "group_share", "unseen", "unseen_tokens", "public_tokens", "fractions", "seed"},
             where);
  get(j, "domains", out.domains, where);
  get(j, "tokens_per_domain", out.tokens_per_domain, where);
  get(j, "default_tokens", out.default_tokens, where);
  get(j, "vocab_size", out.vocab_size, where);
  get(j, "skew", out.skew, where);
  get(j, "groups", out.groups, where);
  get(j, "group_share", out.group_share, where);
  get(j, "unseen", out.unseen, where);
  get(j, "unseen_tokens", out.unseen_tokens, where);
  get(j, "public_tokens", out.public_tokens, where);
  if (j.contains("fractions")) read(j["fractions"], out.fractions, sub(where, "fractions"));
  get(j, "seed", out.seed, where);
}

}  // namespace ifcmoe::json_io
