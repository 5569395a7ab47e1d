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

#include "ifcmoe/artifacts.h"

#include <sstream>
#include <vector>

#include "ifcmoe/error.h"
#include "ifcmoe/hash.h"
#include "ifcmoe/textio.h"
#include "json_io.h"

namespace ifcmoe {

namespace fs = std::filesystem;
using json_io::json;

namespace {

constexpr const char* kModelFormat = "ifcmoe-model/1";

std::string digest(const std::string& bytes) {
  Fnv1a h;
  h.update(bytes);
  return h.hex();
}

template <typename T>
T read_value(std::istream& in, const char* what) {
  T v{};
  if (!(in >> v)) throw DataError(std::string("malformed artifact: expected ") + what);
  return v;
}

std::string read_hash(std::istream& in) {
  expect_keyword(in, "corpus");
  return read_value<std::string>(in, "corpus hash");
}

}  // namespace

std::string write_matrix(const PerplexityMatrix& matrix, const std::string& corpus_hash) {
  std::ostringstream os;
  const std::size_t m = matrix.m();
  os << "ifcmoe-pplx/1\ncorpus " << corpus_hash << "\nm " << m << "\nids";
  for (std::size_t i = 1; i <= m; ++i) os << ' ' << i;
  os << "\nheldout";
  for (std::size_t n : matrix.heldout_counts()) os << ' ' << n;
  os << "\nvalues\n";
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      os << (j ? " " : "") << format_double(matrix.raw()[i * m + j]);
    }
    os << '\n';
  }
  return os.str();
}

PerplexityMatrix read_matrix(const std::string& text, std::string* corpus_hash) {
  std::istringstream in(text);
  expect_keyword(in, "ifcmoe-pplx/1");
  const std::string hash = read_hash(in);
  if (corpus_hash) *corpus_hash = hash;
  expect_keyword(in, "m");
  const auto m = read_value<std::size_t>(in, "m");
  expect_keyword(in, "ids");
  for (std::size_t i = 1; i <= m; ++i) {
    if (read_value<std::size_t>(in, "domain id") != i) {
      throw DataError("pplx_matrix: domain ids must be 1..m in order");
    }
  }
  expect_keyword(in, "heldout");
  std::vector<std::size_t> counts(m);
  for (auto& c : counts) c = read_value<std::size_t>(in, "heldout count");
  expect_keyword(in, "values");
  std::vector<double> values(m * m);
  for (double& v : values) v = read_double(in);
  return PerplexityMatrix(m, std::move(values), std::move(counts));
}

std::string write_clusters(const ClusterPartition& p, const std::string& corpus_hash) {
  std::ostringstream os;
  os << "ifcmoe-clusters/1\ncorpus " << corpus_hash << "\ns " << p.s << "\nseed " << p.seed
     << "\nassignment";
  for (auto a : p.assignment) os << ' ' << a;
  os << "\ncentroids " << (p.centroids.empty() ? 0 : p.centroids[0].dim()) << '\n';
  for (const auto& c : p.centroids) {
    for (std::size_t d = 0; d < c.values.size(); ++d) {
      os << (d ? " " : "") << format_double(c.values[d]);
    }
    os << '\n';
  }
  return os.str();
}

ClusterPartition read_clusters(const std::string& text, std::size_t m, std::string* corpus_hash) {
  std::istringstream in(text);
  expect_keyword(in, "ifcmoe-clusters/1");
  const std::string hash = read_hash(in);
  if (corpus_hash) *corpus_hash = hash;
  ClusterPartition p;
  expect_keyword(in, "s");
  p.s = read_value<std::size_t>(in, "s");
  expect_keyword(in, "seed");
  p.seed = read_value<std::uint64_t>(in, "seed");
  expect_keyword(in, "assignment");
  p.assignment.resize(m);
  p.members.resize(p.s);
  for (std::size_t i = 0; i < m; ++i) {
    const auto a = read_value<std::uint32_t>(in, "cluster id");
    if (a > p.s) throw DataError("clusters: assignment out of range");
    p.assignment[i] = a;
    if (a > 0) p.members[a - 1].push_back(static_cast<DomainId>(i + 1));
  }
  expect_keyword(in, "centroids");
  const auto dim = read_value<std::size_t>(in, "centroid dim");
  p.centroids.resize(p.s);
  for (auto& c : p.centroids) {
    c.values.resize(dim);
    for (double& v : c.values) v = read_double(in);
  }
  return p;
}

std::string write_vectors(const DomainVectorTable& vectors, const EmbeddingParams& params,
                          const std::string& corpus_hash) {
  std::ostringstream os;
  os << "ifcmoe-vectors/1\ncorpus " << corpus_hash << "\ndim " << params.dim << "\nseed "
     << params.seed << "\nhashes " << params.hashes_per_token << "\ncap " << params.domain_cap
     << "\nm " << vectors.size() << '\n';
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const auto& v = vectors.raw()[i].values;
    os << (i + 1);
    for (double x : v) os << ' ' << format_double(x);
    os << '\n';
  }
  return os.str();
}

DomainVectorTable read_vectors(const std::string& text, const EmbeddingParams& params,
                               std::string* corpus_hash) {
  std::istringstream in(text);
  expect_keyword(in, "ifcmoe-vectors/1");
  const std::string hash = read_hash(in);
  if (corpus_hash) *corpus_hash = hash;
  expect_keyword(in, "dim");
  const auto dim = read_value<std::size_t>(in, "dim");
  expect_keyword(in, "seed");
  const auto seed = read_value<std::uint64_t>(in, "seed");
  expect_keyword(in, "hashes");
  const auto hashes = read_value<std::size_t>(in, "hashes");
  expect_keyword(in, "cap");
  const auto cap = read_value<std::size_t>(in, "cap");
  if (dim != params.dim || seed != params.seed || hashes != params.hashes_per_token ||
      cap != params.domain_cap) {
    throw StaleArtifact("domain_vectors were built with different embedding parameters");
  }
  expect_keyword(in, "m");
  const auto m = read_value<std::size_t>(in, "m");
  std::vector<EmbeddingVector> rows(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (read_value<std::size_t>(in, "row id") != i + 1) {
      throw DataError("domain_vectors: rows must be ordered by domain id");
    }
    rows[i].values.resize(dim);
    for (double& v : rows[i].values) v = read_double(in);
  }
  return DomainVectorTable(std::move(rows));
}

void save_pipeline(const Pipeline& pipeline, const fs::path& dir) {
  fs::create_directories(dir);
  const std::string& hash = pipeline.corpus_hash();
  json files = json::object();
  auto put = [&](const std::string& name, const std::string& bytes) {
    write_file(dir / name, bytes);
    files[name] = digest(bytes);
  };
  put("base", pipeline.base().serialize());
  for (const Expert& e : pipeline.experts()) {
    put("expert_" + std::to_string(e.domain()), e.serialize());
  }
  put("pplx_matrix", write_matrix(pipeline.matrix(), hash));
  put("clusters", write_clusters(pipeline.partition(), hash));
  put("domain_vectors", write_vectors(pipeline.vectors(), pipeline.config().embedding, hash));
  json manifest = {{"format", kModelFormat},
                   {"corpus_hash", hash},
                   {"m", pipeline.m()},
                   {"vocab_size", pipeline.vocab_size()},
                   {"sample_counts", pipeline.stats().raw()},
                   {"train_config", json_io::to_json(pipeline.config())},
                   {"files", files}};
  write_file(dir / "model.json", manifest.dump(2) + "\n");
}

namespace {

json read_manifest(const fs::path& dir) {
  const fs::path path = dir / "model.json";
  if (!fs::exists(path)) {
    throw ConfigError(dir.string() + " is not a model directory (no model.json); run train first");
  }
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (j.value("format", "") != kModelFormat) {
    throw DataError(path.string() + ": unsupported model format");
  }
  return j;
}

}  // namespace

std::string read_model_corpus_hash(const fs::path& dir) {
  return read_manifest(dir).at("corpus_hash").get<std::string>();
}

Pipeline load_pipeline(const fs::path& dir, const std::optional<std::string>& expected) {
  const json manifest = read_manifest(dir);
  const std::string hash = manifest.at("corpus_hash").get<std::string>();
  const std::string hint = "; regenerate with `ifcmoe train`";
  if (expected && *expected != hash) {
    throw StaleArtifact("model in " + dir.string() + " was trained on corpus " + hash +
                        " but the corpus is now " + *expected + hint);
  }
  const json& files = manifest.at("files");
  auto load = [&](const std::string& name) {
    if (!files.contains(name)) throw DataError("model.json does not list " + name);
    const std::string bytes = read_file(dir / name);
    if (digest(bytes) != files[name].get<std::string>()) {
      throw StaleArtifact(name + " changed after training" + hint);
    }
    return bytes;
  };
  auto check_hash = [&](const std::string& name, const std::string& recorded) {
    if (recorded != hash) {
      throw StaleArtifact(name + " belongs to corpus " + recorded + ", not " + hash + hint);
    }
  };

  TrainConfig config;
  json_io::read(manifest.at("train_config"), config, "train_config");
  const auto m = manifest.at("m").get<std::size_t>();
  auto base = std::make_shared<const BaseModel>(BaseModel::deserialize(load("base")));
  std::vector<Expert> experts;
  experts.reserve(m);
  for (std::size_t id = 1; id <= m; ++id) {
    experts.push_back(Expert::deserialize(load("expert_" + std::to_string(id)), base));
  }
  std::string recorded;
  PerplexityMatrix matrix = read_matrix(load("pplx_matrix"), &recorded);
  check_hash("pplx_matrix", recorded);
  ClusterPartition partition = read_clusters(load("clusters"), m, &recorded);
  check_hash("clusters", recorded);
  DomainVectorTable vectors = read_vectors(load("domain_vectors"), config.embedding, &recorded);
  check_hash("domain_vectors", recorded);
  if (matrix.m() != m || vectors.size() != m) {
    throw DataError("model artifacts disagree on the number of domains");
  }
  DomainStats stats(manifest.at("sample_counts").get<std::vector<std::uint64_t>>());
  return Pipeline(config, std::move(base), std::move(experts), std::move(matrix),
                  std::move(vectors), std::move(partition), std::move(stats), hash);
}

}  // namespace ifcmoe
