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

#ifndef IFCMOE_POLICY_H_
#define IFCMOE_POLICY_H_

#include <cstddef>
#include <cstdint>
#include <mutex>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "ifcmoe/types.h"

namespace ifcmoe {

// The set of domain ids a user may access. Ids are sorted and unique.
class AccessPolicy {
 public:
  // Throws ConfigError if `ids` is empty or names a domain outside 1..m.
  AccessPolicy(std::vector<DomainId> ids, std::size_t m);

  // Every domain 1..m.
  static AccessPolicy all(std::size_t m);
  // "1,4,7" or "@path" (one id per line, '#' comments allowed).
  static AccessPolicy parse(std::string_view spec, std::size_t m);

  bool contains(DomainId id) const {
    return id < mask_.size() && mask_[id] != 0;
  }
  std::span<const DomainId> ids() const { return ids_; }
  std::size_t size() const { return ids_.size(); }
  std::size_t m() const { return mask_.size() - 1; }

  std::string to_string() const;
  bool operator==(const AccessPolicy& o) const { return ids_ == o.ids_ && mask_.size() == o.mask_.size(); }

 private:
  std::vector<DomainId> ids_;
  std::vector<std::uint8_t> mask_;  // indexed by id, slot 0 unused
};

enum class ArtifactKind {
  kExpert,
  kDomainVector,
  kMatrixCell,
  kDomainCount,
  kHeldout,
};

struct ArtifactAccess {
  ArtifactKind kind;
  DomainId domain;
  // Matrix column for kMatrixCell, otherwise 0.
  DomainId column = 0;
};

// Records which per-domain artifacts a computation read. Components that
// hold per-domain data report every read to an attached audit; tests and
// the CLI use it to check that nothing outside a policy was consulted.
class ArtifactAudit {
 public:
  void record(ArtifactKind kind, DomainId domain, DomainId column = 0);
  std::vector<ArtifactAccess> accesses() const;
  // Domains touched through any artifact kind (matrix rows and columns
  // both count).
  std::set<DomainId> domains() const;
  std::set<DomainId> domains(ArtifactKind kind) const;
  void clear();

 private:
  mutable std::mutex mu_;
  std::vector<ArtifactAccess> accesses_;
};

}  // namespace ifcmoe

#endif  // IFCMOE_POLICY_H_
