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


#ifndef IFCMOE_TESTS_SUPPORT_TEST_SUPPORT_H_
#define IFCMOE_TESTS_SUPPORT_TEST_SUPPORT_H_

#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "ifcmoe/corpus.h"
#include "ifcmoe/pipeline.h"
#include "ifcmoe/policy.h"
#include "ifcmoe/random.h"

namespace ifcmoe::testing {

// Four skewed domains, small enough to train in well under a second.
SynthSpec small_spec();
const Corpus& small_corpus();
const Pipeline& small_pipeline();

// Hand-rolled generators for property tests.
AccessPolicy random_policy(Rng& rng, std::size_t m);
std::vector<double> random_dist(Rng& rng, std::size_t size);
TokenSeq random_tokens(Rng& rng, std::size_t length, std::size_t vocab_size);
std::vector<DomainId> iota_ids(std::size_t m);

double sum(std::span<const double> values);

// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(std::string_view name);

}  // namespace ifcmoe::testing

#endif  // IFCMOE_TESTS_SUPPORT_TEST_SUPPORT_H_
