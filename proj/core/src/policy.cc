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

#include "ifcmoe/policy.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <string>

#include "ifcmoe/error.h"

namespace ifcmoe {

AccessPolicy::AccessPolicy(std::vector<DomainId> ids, std::size_t m) : ids_(std::move(ids)) {
  if (ids_.empty()) throw ConfigError("access policy must contain at least one domain");
  std::sort(ids_.begin(), ids_.end());
  ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
  mask_.assign(m + 1, 0);
  for (DomainId id : ids_) {
    if (id < 1 || id > m) {
      throw ConfigError("access policy names domain " + std::to_string(id) +
                        " outside 1.." + std::to_string(m));
    }
    mask_[id] = 1;
  }
}

AccessPolicy AccessPolicy::all(std::size_t m) {
  std::vector<DomainId> ids(m);
  for (std::size_t i = 0; i < m; ++i) ids[i] = static_cast<DomainId>(i + 1);
  return AccessPolicy(std::move(ids), m);
}

namespace {

DomainId parse_id(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  DomainId id = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), id);
  if (s.empty() || ec != std::errc() || end != s.data() + s.size()) {
    throw ConfigError("bad domain id '" + std::string(s) + "' in access policy");
  }
  return id;
}

}  // namespace

AccessPolicy AccessPolicy::parse(std::string_view spec, std::size_t m) {
  std::vector<DomainId> ids;
  if (!spec.empty() && spec.front() == '@') {
    const std::string path(spec.substr(1));
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read policy file " + path);
    std::string line;
    while (std::getline(in, line)) {
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      ids.push_back(parse_id(line));
    }
  } else {
    std::size_t pos = 0;
    while (pos <= spec.size()) {
      const auto comma = spec.find(',', pos);
      const auto end = comma == std::string_view::npos ? spec.size() : comma;
      ids.push_back(parse_id(spec.substr(pos, end - pos)));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
  }
  return AccessPolicy(std::move(ids), m);
}

std::string AccessPolicy::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(ids_[i]);
  }
  return out;
}

void ArtifactAudit::record(ArtifactKind kind, DomainId domain, DomainId column) {
  std::lock_guard lock(mu_);
  accesses_.push_back({kind, domain, column});
}

std::vector<ArtifactAccess> ArtifactAudit::accesses() const {
  std::lock_guard lock(mu_);
  return accesses_;
}

std::set<DomainId> ArtifactAudit::domains() const {
  std::lock_guard lock(mu_);
  std::set<DomainId> out;
  for (const auto& a : accesses_) {
    out.insert(a.domain);
    if (a.kind == ArtifactKind::kMatrixCell) out.insert(a.column);
  }
  return out;
}

std::set<DomainId> ArtifactAudit::domains(ArtifactKind kind) const {
  std::lock_guard lock(mu_);
  std::set<DomainId> out;
  for (const auto& a : accesses_) {
    if (a.kind != kind) continue;
    out.insert(a.domain);
    if (kind == ArtifactKind::kMatrixCell) out.insert(a.column);
  }
  return out;
}

void ArtifactAudit::clear() {
  std::lock_guard lock(mu_);
  accesses_.clear();
}

}  // namespace ifcmoe
