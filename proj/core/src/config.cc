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

#include "ifcmoe/config.h"

#include <algorithm>
#include <vector>

#include "ifcmoe/error.h"
#include "ifcmoe/textio.h"
#include "json_io.h"

namespace ifcmoe {

using json_io::json;

namespace {

json to_json_value(const RunConfig& c) {
  json corpus = {{"text_dir", c.corpus.text_dir},
                 {"fractions", json_io::to_json(c.corpus.fractions)},
                 {"max_vocab", c.corpus.max_vocab},
                 {"synth", json_io::to_json(c.corpus.synth)}};
  json train = json_io::to_json(c.train);
  return {{"corpus", corpus},
          {"expert", train["expert"]},
          {"embedding", train["embedding"]},
          {"train",
           {{"heldout_cap", c.train.heldout_cap},
            {"clusters", c.train.clusters},
            {"cluster_seed", c.train.cluster_seed},
            {"kmeans_iterations", c.train.kmeans_iterations}}},
          {"gate", json_io::to_json(c.engine.gate)},
          {"engine", json_io::to_json(c.engine)},
          {"seed", c.seed}};
}

RunConfig from_json_value(const json& j) {
  RunConfig c;
  json_io::check_keys(j, {"corpus", "expert", "embedding", "train", "gate", "engine", "seed"},
                      "config");
  if (j.contains("corpus")) {
    const json& cj = j["corpus"];
    json_io::check_keys(cj, {"text_dir", "fractions", "max_vocab", "synth"}, "corpus");
    if (cj.contains("text_dir")) {
      if (!cj["text_dir"].is_string()) throw ConfigError("corpus.text_dir must be a string");
      c.corpus.text_dir = cj["text_dir"].get<std::string>();
    }
    if (cj.contains("fractions")) {
      json_io::read(cj["fractions"], c.corpus.fractions, "corpus.fractions");
    }
    if (cj.contains("max_vocab")) {
      if (!cj["max_vocab"].is_number_unsigned()) {
        throw ConfigError("corpus.max_vocab must be a non-negative integer");
      }
      c.corpus.max_vocab = cj["max_vocab"].get<std::size_t>();
    }
    if (cj.contains("synth")) json_io::read(cj["synth"], c.corpus.synth, "corpus.synth");
  }
  if (j.contains("expert")) json_io::read(j["expert"], c.train.ngram, "expert");
  if (j.contains("embedding")) json_io::read(j["embedding"], c.train.embedding, "embedding");
  if (j.contains("train")) {
    json t = j["train"];
    json_io::check_keys(t, {"heldout_cap", "clusters", "cluster_seed", "kmeans_iterations"},
                        "train");
    json_io::read(t, c.train, "train");
  }
  if (j.contains("gate")) json_io::read(j["gate"], c.engine.gate, "gate");
  if (j.contains("engine")) json_io::read(j["engine"], c.engine, "engine");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ConfigError("seed must be a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  return c;
}

}  // namespace

RunConfig RunConfig::parse(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c = from_json_value(j);
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  try {
    return parse(read_file(path));
  } catch (const DataError& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
}

std::string RunConfig::to_json() const { return to_json_value(*this).dump(2) + "\n"; }

void RunConfig::set(std::string_view key, std::string_view value) {
  json j = to_json_value(*this);
  json v;
  try {
    v = json::parse(value);
  } catch (const json::parse_error&) {
    v = std::string(value);
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part(key.substr(start, dot == std::string_view::npos ? key.npos
                                                                             : dot - start));
    if (!node->is_object() || !node->contains(part)) {
      throw ConfigError("unknown config key '" + std::string(key) + "'");
    }
    node = &(*node)[part];
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  *node = v;
  *this = from_json_value(j);
}

void RunConfig::validate() const {
  corpus.fractions.validate();
  train.ngram.validate();
  train.embedding.validate();
  if (train.heldout_cap < 1) throw ConfigError("train.heldout_cap must be positive");
  if (train.clusters < 1) throw ConfigError("train.clusters must be positive");
  if (train.kmeans_iterations < 1) throw ConfigError("train.kmeans_iterations must be positive");
  // s is bounded by m once the corpus is known.
  engine.validate(std::max<std::size_t>(engine.gate.s, 1));
  if (corpus.text_dir.empty()) {
    if (engine.gate.s > corpus.synth.domains) {
      throw ConfigError("gate.s must not exceed the number of synthetic domains");
    }
    SyntheticSource check(corpus.synth);
    (void)check;
  }
}

Corpus make_corpus(const CorpusSource& source) {
  if (source.text_dir.empty()) return synth_corpus(source.synth);
  namespace fs = std::filesystem;
  const fs::path root(source.text_dir);
  if (!fs::is_directory(root)) {
    throw ConfigError("corpus.text_dir '" + source.text_dir + "' is not a directory");
  }
  std::vector<RawText> texts;
  auto add = [&](const char* sub, TextRole role) {
    const fs::path dir = root / sub;
    if (!fs::is_directory(dir)) return;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".txt") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) texts.push_back({f.stem().string(), read_file(f), role});
  };
  add("domains", TextRole::kDomain);
  add("unseen", TextRole::kUnseen);
  add("public", TextRole::kPublic);
  CorpusOptions options;
  options.fractions = source.fractions;
  options.max_vocab = source.max_vocab;
  options.seed = source.synth.seed;
  return build_corpus(texts, options);
}

}  // namespace ifcmoe
