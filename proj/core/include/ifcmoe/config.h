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

#ifndef IFCMOE_CONFIG_H_
#define IFCMOE_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "ifcmoe/corpus.h"
#include "ifcmoe/engine.h"
#include "ifcmoe/pipeline.h"

namespace ifcmoe {

struct CorpusSource {
  // Directory with domains/, unseen/ and public/ subdirectories of .txt
  // files. Empty means the synthetic generator.
  std::string text_dir;
  SplitFractions fractions;
  std::size_t max_vocab = 50000;
  SynthSpec synth;
};

// Everything a command needs, as one JSON document. Unknown keys are
// rejected; missing keys keep their defaults.
struct RunConfig {
  CorpusSource corpus;
  TrainConfig train;
  EngineConfig engine;
  // Seeds policy and query sampling in ni-check, bench and ablation runs.
  std::uint64_t seed = 1;

  static RunConfig parse(std::string_view json_text);
  static RunConfig load(const std::filesystem::path& path);
  // Pretty-printed resolved configuration; parse(to_json()) round-trips.
  std::string to_json() const;

  // Overrides one dotted key ("gate.k", "engine.backend", ...). The value
  // is read as JSON when it parses, otherwise as a string.
  void set(std::string_view key, std::string_view value);

  // Checks everything that does not depend on the corpus.
  void validate() const;
};

// Builds the corpus the config describes.
Corpus make_corpus(const CorpusSource& source);

}  // namespace ifcmoe

#endif  // IFCMOE_CONFIG_H_
