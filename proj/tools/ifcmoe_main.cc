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

// Command-line front end: build-corpus, train, gate, generate, eval,
// ni-check and bench.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ifcmoe/ablation.h"
#include "ifcmoe/artifacts.h"
#include "ifcmoe/bench.h"
#include "ifcmoe/config.h"
#include "ifcmoe/corpus.h"
#include "ifcmoe/engine.h"
#include "ifcmoe/error.h"
#include "ifcmoe/pipeline.h"
#include "ifcmoe/policy.h"
#include "ifcmoe/random.h"
#include "ifcmoe/textio.h"
#include "ifcmoe/verify.h"

namespace fs = std::filesystem;
using namespace ifcmoe;

namespace {

enum ExitCode {
  kOk = 0,
  kOther = 1,
  kConfig = 2,
  kPolicy = 3,
  kNiFailure = 4,
  kStale = 5,
};

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string runs = "runs";
};

RunConfig resolve_config(const Common& common) {
  RunConfig config = common.config_path.empty() ? RunConfig{} : RunConfig::load(common.config_path);
  for (const std::string& kv : common.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return config;
}

// A fresh directory under `base`; existing runs are never reused.
fs::path make_run_dir(const fs::path& base, const std::string& command) {
  fs::create_directories(base);
  for (int n = 1; n < 1000000; ++n) {
    char suffix[16];
    std::snprintf(suffix, sizeof(suffix), "%04d", n);
    const fs::path dir = base / (command + "-" + suffix);
    if (fs::create_directory(dir)) return dir;
  }
  throw Error("no free run directory under " + base.string());
}

struct Run {
  fs::path dir;
  RunConfig config;
};

Run start_run(const Common& common, const std::string& command, const RunConfig& config,
              int argc, char** argv) {
  Run run{make_run_dir(common.runs, command), config};
  write_file(run.dir / "resolved_config.json", config.to_json());
  std::ostringstream cmd;
  for (int i = 0; i < argc; ++i) cmd << (i ? " " : "") << argv[i];
  write_file(run.dir / "command.txt", cmd.str() + "\n");
  std::cout << "run " << run.dir.string() << "\n";
  return run;
}

Corpus obtain_corpus(const std::string& corpus_dir, const RunConfig& config) {
  if (!corpus_dir.empty()) return load_corpus(corpus_dir);
  return make_corpus(config.corpus);
}

Pipeline obtain_pipeline(const std::string& model_dir, const Corpus& corpus,
                         const RunConfig& config) {
  if (!model_dir.empty()) return load_pipeline(model_dir, corpus.manifest_hash());
  return Pipeline::train(corpus, config.train);
}

struct QueryArgs {
  std::string input_file;
  DomainId domain = 0;
  std::size_t offset = 0;
  std::size_t length = 0;
};

void add_query_options(CLI::App* cmd, QueryArgs& q) {
  cmd->add_option("--input", q.input_file, "Text file to use as the query");
  cmd->add_option("--domain", q.domain, "Use this domain's test split as the query");
  cmd->add_option("--offset", q.offset, "First token of the query within the test split");
  cmd->add_option("--length", q.length, "Query length in tokens (0: to the end)");
}

TokenSeq query_tokens(const QueryArgs& q, const Corpus& corpus) {
  TokenSeq tokens;
  if (!q.input_file.empty()) {
    tokens = corpus.vocabulary.encode(tokenize(read_file(q.input_file)));
  } else if (q.domain != 0) {
    tokens = corpus.domain(q.domain).test;
  } else {
    throw ConfigError("give a query with --input FILE or --domain ID");
  }
  if (q.offset > tokens.size()) throw ConfigError("--offset is past the end of the query");
  tokens.erase(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(q.offset));
  if (q.length != 0 && q.length < tokens.size()) tokens.resize(q.length);
  return tokens;
}

std::string join_ids(const std::vector<DomainId>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) s += (i ? "," : "") + std::to_string(ids[i]);
  return s;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

void write_trace(const fs::path& path, const std::vector<TraceRecord>& trace) {
  std::ofstream out(path);
  for (const TraceRecord& r : trace) {
    out << "position=" << r.position << " experts=" << join_ids(r.experts)
        << " weights=" << join_doubles(r.weights) << " token=" << r.token
        << " log_prob=" << format_double(r.log_prob) << '\n';
  }
}

void write_selections(std::ostream& out, const std::vector<GateEvent>& events) {
  for (const GateEvent& e : events) {
    out << "gate window=" << e.window << " sample=" << e.sample_begin << ".." << e.sample_end
        << " active_from=" << e.active_from << " experts=" << join_ids(e.experts) << '\n';
  }
}

// In strict mode nothing outside the policy may have been read. Domain
// counts are declared public and only matter with the all-domain
// denominator.
void check_audit(const ArtifactAudit& audit, const AccessPolicy& policy, const RunConfig& config,
                 std::ostream& out) {
  if (!config.engine.strict) {
    out << "audit: skipped (non-strict)\n";
    return;
  }
  for (const ArtifactAccess& a : audit.accesses()) {
    if (a.kind == ArtifactKind::kDomainCount &&
        config.engine.size_denominator == SizeDenominator::kAll) {
      continue;
    }
    const bool ok = policy.contains(a.domain) &&
                    (a.kind != ArtifactKind::kMatrixCell || policy.contains(a.column));
    if (!ok) {
      throw PolicyViolation("audit: an artifact of inaccessible domain " +
                            std::to_string(a.domain) + " was read");
    }
  }
  out << "audit: clean\n";
}

std::optional<DomainId> label_for(const std::string& mode, std::optional<DomainId> label) {
  if (mode == "known") {
    if (!label) throw ConfigError("--mode known needs --label");
    return label;
  }
  if (mode != "unknown") throw ConfigError("--mode must be known or unknown");
  return std::nullopt;
}

std::vector<AccessPolicy> random_policies(std::size_t count, std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<AccessPolicy> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<DomainId> ids(m);
    for (std::size_t j = 0; j < m; ++j) ids[j] = static_cast<DomainId>(j + 1);
    rng.shuffle(ids);
    ids.resize(1 + rng.index(m));
    out.emplace_back(std::move(ids), m);
  }
  return out;
}

std::vector<NiQuery> random_queries(const Corpus& corpus, std::size_t count, std::size_t length,
                                    std::uint64_t seed) {
  Rng rng(seed);
  std::vector<NiQuery> out;
  for (std::size_t i = 0; i < count; ++i) {
    const auto d = static_cast<DomainId>(1 + rng.index(corpus.m()));
    const TokenSeq& test = corpus.domain(d).test;
    const std::size_t len = std::min(length, test.size());
    const std::size_t off = rng.index(test.size() - len + 1);
    out.push_back({TokenSeq(test.begin() + static_cast<std::ptrdiff_t>(off),
                            test.begin() + static_cast<std::ptrdiff_t>(off + len)),
                   d});
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Access-policy-aware mixture-of-experts language model inference"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config_path, "JSON run configuration")
      ->check(CLI::ExistingFile);
  app.add_option("--set", common.overrides, "Override a config key: key=value (repeatable)");
  app.add_option("--runs", common.runs, "Directory that receives one run directory per call");

  std::string corpus_dir;
  std::string model_dir;
  std::string policy_spec;
  std::optional<DomainId> label;
  std::string mode = "unknown";
  std::string backend;
  bool strict = false;
  bool no_strict = false;
  QueryArgs query;

  auto add_model_options = [&](CLI::App* cmd) {
    cmd->add_option("--corpus", corpus_dir, "Corpus directory from build-corpus");
    cmd->add_option("--model", model_dir, "Model directory from train");
    cmd->add_option("--policy", policy_spec, "Accessible domains: 1,4,7 or @file")->required();
    cmd->add_option("--label", label, "Domain label for known-label gating");
    cmd->add_option("--mode", mode, "known or unknown")->check(CLI::IsMember({"known", "unknown"}));
    cmd->add_option("--backend", backend, "Gating backend: known, pairwise or cluster");
    cmd->add_flag("--strict", strict, "Force strict non-interference mode");
    cmd->add_flag("--no-strict", no_strict, "Allow non-strict gate-cluster");
  };

  auto* build = app.add_subcommand("build-corpus", "Tokenize, split and save a corpus");
  auto* train = app.add_subcommand("train", "Train the base model, experts and gating artifacts");
  train->add_option("--corpus", corpus_dir, "Corpus directory from build-corpus");

  auto* gate = app.add_subcommand("gate", "Show the experts selected for a query");
  add_model_options(gate);
  add_query_options(gate, query);

  auto* gen = app.add_subcommand("generate", "Decode tokens after a prompt");
  add_model_options(gen);
  add_query_options(gen, query);
  std::size_t gen_tokens = 10;
  std::string decode = "greedy";
  std::optional<std::uint64_t> decode_seed;
  gen->add_option("--tokens", gen_tokens, "Number of tokens to generate");
  gen->add_option("--decode", decode, "greedy or sample")->check(CLI::IsMember({"greedy", "sample"}));
  gen->add_option("--seed", decode_seed, "Seed for sampled decoding");

  auto* eval = app.add_subcommand("eval", "Perplexity of test splits under a policy");
  add_model_options(eval);
  std::vector<DomainId> eval_domains;
  eval->add_option("--domains", eval_domains, "Test splits to score (default: every seen domain)")
      ->delimiter(',');

  auto* ni = app.add_subcommand("ni-check", "Non-interference oracle over perturbed corpora");
  ni->add_option("--corpus", corpus_dir, "Corpus directory from build-corpus");
  std::size_t ni_policies = 20;
  std::size_t ni_queries = 10;
  std::size_t ni_length = 400;
  std::vector<std::string> ni_kinds;
  std::vector<std::string> ni_backends;
  ni->add_option("--policies", ni_policies, "Random policies to check");
  ni->add_option("--queries", ni_queries, "Queries per policy");
  ni->add_option("--query-length", ni_length, "Tokens per query");
  ni->add_option("--kinds", ni_kinds, "Perturbation kinds (default: all)")->delimiter(',');
  ni->add_option("--backends", ni_backends, "Gating backends (default: all)")->delimiter(',');

  auto* bench = app.add_subcommand("bench", "Benchmarks and ablations");
  bench->require_subcommand(1);
  auto* bench_gate_cmd = bench->add_subcommand("gate", "Gate scaling in m and s");
  std::string gate_backend = "pairwise";
  std::vector<std::size_t> m_values;
  std::vector<std::size_t> s_values;
  std::size_t trials = 5;
  bench_gate_cmd->add_option("--backend", gate_backend, "pairwise or cluster");
  bench_gate_cmd->add_option("--m", m_values, "Domain counts")->delimiter(',');
  bench_gate_cmd->add_option("--s", s_values, "Cluster counts")->delimiter(',');
  bench_gate_cmd->add_option("--trials", trials, "Trials per point (>= 5)");
  auto* bench_pipe = bench->add_subcommand("pipeline", "End-to-end latency vs the model");
  bench_pipe->add_option("--corpus", corpus_dir, "Corpus directory from build-corpus");
  bench_pipe->add_option("--model", model_dir, "Model directory from train");
  bench_pipe->add_option("--trials", trials, "Trials per point (>= 5)");
  auto* bench_ablate = bench->add_subcommand("ablate", "Sweep k, lambda or c");
  bench_ablate->add_option("--corpus", corpus_dir, "Corpus directory from build-corpus");
  bench_ablate->add_option("--model", model_dir, "Model directory from train");
  std::string knob = "k";
  std::vector<double> values;
  std::vector<std::size_t> bins;
  std::size_t per_bin = 3;
  bench_ablate->add_option("--knob", knob, "k, lambda or c");
  bench_ablate->add_option("--values", values, "Sweep values")->delimiter(',')->required();
  bench_ablate->add_option("--bins", bins, "Accessible-domain counts")->delimiter(',');
  bench_ablate->add_option("--policies-per-bin", per_bin, "Policies per bin (>= 3)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    RunConfig config = resolve_config(common);
    if (strict && no_strict) throw ConfigError("--strict and --no-strict are exclusive");
    if (strict) config.engine.strict = true;
    if (no_strict) config.engine.strict = false;
    if (!backend.empty()) config.engine.backend = parse_backend(backend);
    config.validate();

    if (build->parsed()) {
      Run run = start_run(common, "build-corpus", config, argc, argv);
      const Corpus corpus = make_corpus(config.corpus);
      save_corpus(corpus, run.dir / "corpus");
      std::cout << "corpus " << (run.dir / "corpus").string() << " m=" << corpus.m()
                << " unseen=" << corpus.unseen.size() << " vocab=" << corpus.vocabulary.size()
                << " hash=" << corpus.manifest_hash() << "\n";
      return kOk;
    }

    if (train->parsed()) {
      Run run = start_run(common, "train", config, argc, argv);
      const Corpus corpus = obtain_corpus(corpus_dir, config);
      const Pipeline pipeline = Pipeline::train(corpus, config.train);
      save_pipeline(pipeline, run.dir / "model");
      std::cout << "model " << (run.dir / "model").string() << " m=" << pipeline.m()
                << " corpus=" << pipeline.corpus_hash() << "\n";
      for (const Expert& e : pipeline.experts()) {
        std::cout << "expert " << e.domain() << " delta_entries=" << e.delta_size() << "\n";
      }
      return kOk;
    }

    if (gate->parsed() || gen->parsed() || eval->parsed()) {
      const std::string name = gate->parsed() ? "gate" : gen->parsed() ? "generate" : "eval";
      Run run = start_run(common, name, config, argc, argv);
      const Corpus corpus = obtain_corpus(corpus_dir, config);
      Pipeline pipeline = obtain_pipeline(model_dir, corpus, config);
      const AccessPolicy policy = AccessPolicy::parse(policy_spec, pipeline.m());
      std::optional<DomainId> use_label = label_for(mode, label);
      if (config.engine.backend == GateBackend::kKnown && !use_label) {
        throw ConfigError("backend known needs --mode known --label ID");
      }
      ArtifactAudit audit;
      pipeline.set_audit(&audit);
      std::ostringstream report;
      report << "policy " << policy.to_string() << "\nmode " << mode << "\n";

      if (gate->parsed()) {
        const TokenSeq tokens = query_tokens(query, corpus);
        const InferenceResult r = infer(pipeline, tokens, policy, use_label, config.engine, false);
        write_selections(report, r.gate_events);
      } else if (gen->parsed()) {
        const TokenSeq prompt = query_tokens(query, corpus);
        DecodeOptions opts;
        opts.mode = decode == "sample" ? Decoding::kSample : Decoding::kGreedy;
        opts.seed = decode_seed;
        const Generation g =
            generate(pipeline, prompt, policy, use_label, gen_tokens, opts, config.engine);
        write_selections(report, g.gate_events);
        report << "tokens " << corpus.vocabulary.decode(g.tokens) << "\n";
        write_trace(run.dir / "trace.txt", g.trace);
      } else {
        if (eval_domains.empty()) {
          for (const auto& d : corpus.domains) eval_domains.push_back(d.id);
        }
        double log_sum = 0.0;
        for (DomainId d : eval_domains) {
          const EvalReport r = evaluate(pipeline, corpus.domain(d).test, policy, use_label,
                                        config.engine);
          report << "domain " << d << " perplexity " << format_double(r.perplexity)
                 << " base " << format_double(r.base_perplexity) << " normalized "
                 << format_double(r.normalized) << " scored " << r.scored << "\n";
          write_selections(report, r.selections);
          log_sum += std::log(r.normalized);
        }
        report << "mean_normalized_geometric "
               << format_double(std::exp(log_sum / static_cast<double>(eval_domains.size())))
               << "\n";
      }
      check_audit(audit, policy, config, report);
      write_file(run.dir / "report.txt", report.str());
      std::cout << report.str();
      return kOk;
    }

    if (ni->parsed()) {
      Run run = start_run(common, "ni-check", config, argc, argv);
      const Corpus corpus = obtain_corpus(corpus_dir, config);
      const auto policies =
          random_policies(ni_policies, corpus.m(), derive_seed(config.seed, 1));
      const auto queries =
          random_queries(corpus, ni_queries, ni_length, derive_seed(config.seed, 2));
      NiOptions options;
      options.seed = derive_seed(config.seed, 3);
      if (!ni_kinds.empty()) {
        options.kinds.clear();
        for (const auto& k : ni_kinds) options.kinds.push_back(parse_perturbation(k));
      }
      if (!ni_backends.empty()) {
        options.backends.clear();
        for (const auto& b : ni_backends) options.backends.push_back(parse_backend(b));
      }
      const NiReport r = verify_ni(corpus, policies, queries, config.train, config.engine, options);
      write_file(run.dir / "report.txt", r.to_text());
      std::cout << r.to_text();
      return r.pass ? kOk : kNiFailure;
    }

    if (bench->parsed()) {
      TimingOptions timing;
      timing.trials = std::max<std::size_t>(trials, 5);
      if (bench_gate_cmd->parsed()) {
        Run run = start_run(common, "bench-gate", config, argc, argv);
        GateBenchOptions o;
        o.timing = timing;
        o.seed = config.seed;
        if (!m_values.empty()) o.m_values = m_values;
        o.s_values = s_values;
        const GateBackend b = parse_backend(gate_backend);
        const auto rows = bench_gate(b, o);
        std::ostringstream csv;
        csv << "backend,m,s,k,dim,median_s,min_s,max_s,trials,note\n";
        std::vector<double> xs;
        std::vector<double> ys;
        for (const GateTiming& t : rows) {
          csv << to_string(t.backend) << ',' << t.m << ',' << t.s << ',' << t.k << ',' << t.dim
              << ',' << format_double(t.time.median) << ',' << format_double(t.time.min) << ','
              << format_double(t.time.max) << ',' << t.time.trials << ',' << t.note << '\n';
          if (t.note.empty()) {
            xs.push_back(static_cast<double>(b == GateBackend::kPairwise ? t.m : t.s));
            ys.push_back(t.time.median);
          }
        }
        write_file(run.dir / "gate.csv", csv.str());
        std::cout << csv.str();
        if (xs.size() >= 2) {
          for (const FitResult& f : fit_all(xs, ys)) {
            std::cout << "fit form=\"" << to_string(f.form) << "\" r2=" << format_double(f.r2)
                      << "\n";
          }
        }
        return kOk;
      }
      const Corpus corpus = obtain_corpus(corpus_dir, config);
      const Pipeline pipeline = obtain_pipeline(model_dir, corpus, config);
      if (bench_pipe->parsed()) {
        Run run = start_run(common, "bench-pipeline", config, argc, argv);
        PipelineBenchOptions o;
        o.engine = config.engine;
        o.timing = timing;
        const PipelineBench pb = bench_pipeline(pipeline, corpus, o);
        std::ostringstream csv;
        csv << "tokens,measured_s,predicted_s,baseline_s,overhead,parallel_s\n";
        for (const PipelineTiming& t : pb.rows) {
          csv << t.tokens << ',' << format_double(t.measured) << ',' << format_double(t.predicted)
              << ',' << format_double(t.baseline) << ',' << format_double(t.overhead) << ','
              << format_double(t.parallel) << '\n';
        }
        write_file(run.dir / "pipeline.csv", csv.str());
        std::cout << "model gate=" << format_double(pb.model.gate)
                  << " vectorize=" << format_double(pb.model.vectorize)
                  << " forward=" << format_double(pb.model.forward)
                  << " ensemble=" << format_double(pb.model.ensemble) << " r=" << pb.model.r
                  << "\n"
                  << csv.str();
        return kOk;
      }
      Run run = start_run(common, "bench-ablate", config, argc, argv);
      AblationOptions o;
      o.knob = parse_knob(knob);
      o.values = values;
      o.bins = bins;
      o.policies_per_bin = per_bin;
      o.engine = config.engine;
      o.seed = config.seed;
      const AblationResult res = ablate(pipeline, corpus, o);
      std::ostringstream csv;
      csv << "knob,value,accessible,policies,evaluations,normalized,identification\n";
      for (const AblationRow& r : res.rows) {
        csv << to_string(o.knob) << ',' << format_double(r.value) << ',' << r.accessible << ','
            << r.policies << ',' << r.evaluations << ',' << format_double(r.normalized) << ','
            << format_double(r.identification) << '\n';
      }
      for (const auto& [bin, v] : res.median_best) {
        csv << "# median_best accessible=" << bin << " value=" << format_double(v) << '\n';
      }
      write_file(run.dir / "ablation.csv", csv.str());
      std::cout << csv.str();
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const PolicyViolation& e) {
    std::cerr << "policy violation: " << e.what() << "\n";
    return kPolicy;
  } catch (const StaleArtifact& e) {
    std::cerr << "stale artifact: " << e.what() << "\n";
    return kStale;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
  return kOther;
}
