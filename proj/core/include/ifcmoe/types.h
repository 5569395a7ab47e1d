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

#ifndef IFCMOE_TYPES_H_
#define IFCMOE_TYPES_H_

#include <cstdint>
#include <span>
#include <vector>

namespace ifcmoe {

using TokenId = std::uint32_t;
using DomainId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;
using TokenView = std::span<const TokenId>;

inline constexpr TokenId kUnknownToken = 0;

}  // namespace ifcmoe

#endif  // IFCMOE_TYPES_H_
