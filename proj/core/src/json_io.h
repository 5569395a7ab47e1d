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

#ifndef IFCMOE_SRC_JSON_IO_H_
#define IFCMOE_SRC_JSON_IO_H_

#include <initializer_list>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "ifcmoe/corpus.h"
#include "ifcmoe/engine.h"
#include "ifcmoe/pipeline.h"

namespace ifcmoe::json_io {

using nlohmann::json;

// Throws ConfigError naming the first key of `j` not in `allowed`.
void check_keys(const json& j, std::initializer_list<std::string_view> allowed,
                std::string_view where);

json to_json(const NgramParams& p);
json to_json(const EmbeddingParams& p);
json to_json(const TrainConfig& c);
json to_json(const GateConfig& g);
json to_json(const EngineConfig& e);
json to_json(const SplitFractions& f);
json to_json(const SynthSpec& s);

// Each reader starts from `out` and overwrites only the keys present.
void read(const json& j, NgramParams& out, std::string_view where);
void read(const json& j, EmbeddingParams& out, std::string_view where);
void read(const json& j, TrainConfig& out, std::string_view where);
void read(const json& j, GateConfig& out, std::string_view where);
void read(const json& j, EngineConfig& out, std::string_view where);
void read(const json& j, SplitFractions& out, std::string_view where);
void read(const json& j, SynthSpec& out, std::string_view where);

}  // namespace ifcmoe::json_io

#endif  // IFCMOE_SRC_JSON_IO_H_
