// Copyright 2026 The PETER Authors.
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

// peter: command-line front end.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "peter/peter.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw peter::Error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string file_digest(const std::string& path) { return "fnv1a64:" + peter::fnv1a_hex(read_file(path)); }

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty() || out_path == "-") std::cout << content;
  else peter::write_file_atomic(out_path, content);
}

std::string utc_now() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

// ---------------------------------------------------------------- expand

struct ExpandArgs {
  std::string corpus, pattern = "p1", entity_type = "disease", schema = "iob2", out;
  std::size_t max_tokens = 0;
  bool untagged = false;
};

int cmd_expand(const ExpandArgs& a) {
  auto schema = peter::TagSchema::parse(a.schema);
  auto pvp = peter::resolve_pvp(a.pattern, schema);
  peter::ConllOptions opts;
  opts.require_tags = !a.untagged;
  auto corpus = peter::read_conll(a.corpus, schema, a.entity_type, opts);
  std::ostringstream os;
  for (const auto& s : corpus.sentences)
    for (const auto& ex : peter::expand(pvp.pattern, s, corpus.entity_type, a.max_tokens))
      os << peter::cloze_to_json(ex, pvp.id()).dump() << '\n';
  emit(a.out, os.str());
  return kExitOk;
}

// ------------------------------------------------------------------ eval

struct EvalArgs {
  std::string gold, pred, schema = "iob2", entity_type = "entity", format = "table";
  bool repair = false;
};

int cmd_eval(const EvalArgs& a) {
  auto schema = peter::TagSchema::parse(a.schema);
  peter::ConllOptions opts;
  opts.repair = a.repair;
  auto gold = peter::read_conll(a.gold, schema, a.entity_type);
  auto pred = peter::read_conll(a.pred, schema, a.entity_type, opts);
  auto m = peter::span_prf(gold, pred);
  if (a.format == "json") {
    std::cout << peter::prf_to_json(m).dump(2) << '\n';
  } else {
    std::printf("precision %.4f\nrecall    %.4f\nf1        %.4f\nsupport   %zu\n", m.precision, m.recall, m.f1,
                m.support);
  }
  return kExitOk;
}

// ----------------------------------------------------------------- stats

struct StatsArgs {
  std::string corpus, schema = "iob2", entity_type = "entity", format = "json";
};

int cmd_stats(const StatsArgs& a) {
  auto corpus = peter::read_conll(a.corpus, peter::TagSchema::parse(a.schema), a.entity_type);
  auto st = peter::corpus_stats(corpus);
  if (a.format == "json") {
    std::cout << st.to_json().dump(2) << '\n';
  } else {
    std::printf("sentences %zu\ntokens    %zu\nentities  %zu\n", st.sentences, st.tokens, st.entities);
    for (const auto& [l, c] : st.label_counts) std::printf("label %-3s %zu\n", l.c_str(), c);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- sample

struct SampleArgs {
  std::string corpus, schema = "iob2", out;
  std::size_t k = 10;
  std::uint64_t seed = 1;
};

int cmd_sample(const SampleArgs& a) {
  auto corpus = peter::read_conll(a.corpus, peter::TagSchema::parse(a.schema), "entity");
  auto split = peter::split_k_shot(corpus, {a.k, a.seed});
  if (split.exhausted)
    std::cerr << "warning: k = " << a.k << " exceeds the corpus size " << corpus.size()
              << "; returning the whole corpus\n";
  emit(a.out, peter::to_conll(split.sample));
  return kExitOk;
}

// -------------------------------------------------------------- generate

struct GenerateArgs {
  peter::GazetteerOptions opt;
  std::string out;
};

int cmd_generate(const GenerateArgs& a) {
  emit(a.out, peter::to_conll(peter::gazetteer_corpus(a.opt)));
  return kExitOk;
}

// -------------------------------------------------------- run-experiment

struct RunArgs {
  std::string train, unlabeled, test, out = "run", scorer = "builtin", classifier = "builtin";
  std::string entity_type = "disease", schema = "iob2", format = "table", manifest;
  std::vector<std::size_t> shots{10, 25, 50, 100};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<std::string> patterns{"p1", "p2"};
  std::size_t workers = 1, unlabeled_cap = 10000, max_tokens = 128, distill_epochs = 3;
  std::size_t epochs = 0;
  bool keep_going = false;
  bool sample_std = false;
};

std::string resolve_bridge(const std::string& spec) {
  if (spec == "builtin") return {};
  if (spec == "bridge") {
    const char* env = std::getenv("PETER_BRIDGE");
    if (!env || !*env) throw peter::ConfigError("--scorer bridge needs an address or PETER_BRIDGE");
    return env;
  }
  if (spec.rfind("bridge:", 0) == 0 && spec.size() > 7) return spec.substr(7);
  throw peter::ConfigError("unknown scorer '" + spec + "' (expected builtin or bridge:<address>)");
}

peter::ComponentsFactory make_components(const std::string& scorer_addr, const std::string& classifier_addr) {
  return [scorer_addr, classifier_addr](const peter::PipelineConfig& pc) {
    auto c = peter::builtin_components(pc);
    if (!scorer_addr.empty())
      c.scorer_factory = [scorer_addr]() -> std::unique_ptr<peter::Scorer> {
        return peter::BridgeScorer::connect(scorer_addr);
      };
    if (!classifier_addr.empty())
      c.classifier_factory = [classifier_addr]() -> std::unique_ptr<peter::TokenClassifier> {
        return std::make_unique<peter::BridgeTokenClassifier>(peter::open_channel(classifier_addr));
      };
    return c;
  };
}

ordered_json manifest_args(const RunArgs& a, const peter::PipelineConfig& pc, const peter::TagSchema& schema) {
  ordered_json j;
  j["train"] = a.train;
  j["unlabeled"] = a.unlabeled;
  j["test"] = a.test;
  j["shots"] = a.shots;
  j["seeds"] = a.seeds;
  j["scorer"] = a.scorer;
  j["classifier"] = a.classifier;
  j["entity_type"] = a.entity_type;
  j["schema"] = a.schema;
  j["workers"] = a.workers;
  j["sample_std"] = a.sample_std;
  j["pipeline"] = pc.to_json(schema);
  return j;
}

int cmd_run(RunArgs a) {
  std::optional<ordered_json> replay;
  if (!a.manifest.empty()) {
    auto m = nlohmann::json::parse(read_file(a.manifest));
    const auto& args = m.at("args");
    a.train = args.at("train");
    a.unlabeled = args.value("unlabeled", "");
    a.test = args.at("test");
    a.shots = args.at("shots").get<std::vector<std::size_t>>();
    a.seeds = args.at("seeds").get<std::vector<std::uint64_t>>();
    a.scorer = args.value("scorer", "builtin");
    a.classifier = args.value("classifier", "builtin");
    a.entity_type = args.at("entity_type");
    a.schema = args.at("schema");
    a.workers = args.value("workers", std::size_t{1});
    a.sample_std = args.value("sample_std", false);
    replay = args.at("pipeline");
    for (const auto& [name, digest] : m.at("inputs").items()) {
      const std::string path = args.value(name, "");
      if (!path.empty() && file_digest(path) != digest.get<std::string>())
        std::cerr << "warning: " << name << " file " << path << " changed since the manifest was written\n";
    }
  }
  if (a.train.empty() || a.test.empty()) throw peter::ConfigError("--train and --test are required");

  auto schema = peter::TagSchema::parse(a.schema);
  peter::ProtocolConfig proto;
  proto.shots = a.shots;
  proto.seeds = a.seeds;
  proto.workers = a.workers;
  proto.sample_std = a.sample_std;
  if (replay) {
    proto.pipeline = peter::PipelineConfig::from_json(*replay, schema);
  } else {
    for (const auto& p : a.patterns) proto.pipeline.pvps.push_back(peter::resolve_pvp(p, schema));
    proto.pipeline.unlabeled_cap = a.unlabeled_cap;
    proto.pipeline.max_sequence_tokens = a.max_tokens;
    proto.pipeline.distill_epochs = a.distill_epochs;
    if (a.epochs) proto.pipeline.epochs_override = a.epochs;
  }
  proto.pipeline.seeds = a.seeds;
  for (auto k : proto.shots) {
    auto pc = proto.pipeline;
    pc.shots = k;
    pc.check();
  }

  const std::string scorer_addr = resolve_bridge(a.scorer);
  const std::string classifier_addr = resolve_bridge(a.classifier);
  // Fail fast on an unreachable bridge rather than once per cell.
  if (!scorer_addr.empty())
    peter::BridgeClient(peter::open_channel(scorer_addr)).handshake(proto.pipeline.pvps.front().verbalizer.words());
  if (!classifier_addr.empty())
    peter::BridgeClient(peter::open_channel(classifier_addr)).handshake(schema.labels());

  auto train = peter::read_conll(a.train, schema, a.entity_type);
  auto test = peter::read_conll(a.test, schema, a.entity_type);
  std::optional<peter::Corpus> unlabeled;
  if (!a.unlabeled.empty()) {
    peter::ConllOptions o;
    o.require_tags = false;
    unlabeled = peter::read_conll(a.unlabeled, schema, a.entity_type, o);
  }

  const fs::path out(a.out);
  fs::create_directories(out);
  ordered_json manifest;
  manifest["tool"] = "peter";
  manifest["version"] = peter::kVersion;
  manifest["started"] = utc_now();
  manifest["args"] = manifest_args(a, proto.pipeline, schema);
  ordered_json inputs;
  inputs["train"] = file_digest(a.train);
  if (!a.unlabeled.empty()) inputs["unlabeled"] = file_digest(a.unlabeled);
  inputs["test"] = file_digest(a.test);
  manifest["inputs"] = inputs;

  auto report = peter::run_protocol(train, unlabeled, test, proto, make_components(scorer_addr, classifier_addr), out);

  manifest["finished"] = utc_now();
  manifest["fingerprint"] = report.fingerprint;
  peter::write_file_atomic(out / "manifest.json", manifest.dump(2) + "\n");
  peter::write_file_atomic(out / "report.json", report.to_json().dump(2) + "\n");
  peter::write_file_atomic(out / "report.txt", report.table());
  peter::write_file_atomic(out / "curve.csv", report.curve_csv());

  if (a.format == "json") std::cout << report.to_json().dump(2) << '\n';
  else std::cout << report.table();

  if (!report.all_ok()) {
    for (const auto& c : report.cells)
      if (!c.ok()) std::cerr << "cell k=" << c.shots << " seed=" << c.seed << " failed: " << c.error << '\n';
    return a.keep_going ? kExitOk : kExitRuntime;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PETER: few-shot NER with cloze questions"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(peter::kVersion));

  ExpandArgs ex;
  auto* expand = app.add_subcommand("expand", "render one cloze example per token as JSON lines");
  expand->add_option("--corpus", ex.corpus, "CoNLL corpus")->required();
  expand->add_option("--pattern", ex.pattern, "p1, p2 or a pattern JSON file");
  expand->add_option("--entity-type", ex.entity_type, "entity type word used in the pattern");
  expand->add_option("--schema", ex.schema, "io or iob2");
  expand->add_option("--max-tokens", ex.max_tokens, "truncate rendered examples (0 = no limit)");
  expand->add_flag("--untagged", ex.untagged, "accept token-only lines");
  expand->add_option("--out", ex.out, "output file (default stdout)");

  RunArgs run;
  auto* runc = app.add_subcommand("run-experiment", "multi-seed k-shot protocol");
  runc->add_option("--train", run.train, "tagged training split (k-shot pool)");
  runc->add_option("--unlabeled", run.unlabeled, "unlabeled pool (default: rest of the training split)");
  runc->add_option("--test", run.test, "tagged test split");
  runc->add_option("--k", run.shots, "shot counts")->delimiter(',');
  runc->add_option("--seeds", run.seeds, "seeds")->delimiter(',');
  runc->add_option("--pattern", run.patterns, "p1, p2 or pattern JSON files (repeatable)");
  runc->add_option("--scorer", run.scorer, "builtin, bridge:<host:port|exec:cmd>, or bridge (PETER_BRIDGE)");
  runc->add_option("--classifier", run.classifier, "final classifier: builtin or bridge:<address>");
  runc->add_option("--entity-type", run.entity_type, "entity type word");
  runc->add_option("--schema", run.schema, "io or iob2");
  runc->add_option("--out", run.out, "run directory");
  runc->add_option("--workers", run.workers, "parallel (k, seed) cells");
  runc->add_option("--unlabeled-cap", run.unlabeled_cap, "maximum unlabeled sentences");
  runc->add_option("--max-tokens", run.max_tokens, "maximum rendered cloze length");
  runc->add_option("--distill-epochs", run.distill_epochs, "final classifier epochs");
  runc->add_option("--epochs", run.epochs, "override the shots->epochs schedule");
  runc->add_option("--manifest", run.manifest, "re-run the configuration recorded in a manifest");
  runc->add_flag("--keep-going", run.keep_going, "exit 0 even if some cells fail");
  runc->add_flag("--sample-std", run.sample_std, "report sample instead of population std");
  runc->add_option("--format", run.format, "json or table")->check(CLI::IsMember({"json", "table"}));

  EvalArgs ev;
  auto* evalc = app.add_subcommand("eval", "entity-level precision, recall and F1");
  evalc->add_option("--gold", ev.gold, "gold CoNLL file")->required();
  evalc->add_option("--pred", ev.pred, "predicted CoNLL file")->required();
  evalc->add_option("--schema", ev.schema, "io or iob2");
  evalc->add_flag("--repair", ev.repair, "repair orphan I tags in the prediction");
  evalc->add_option("--format", ev.format, "json or table")->check(CLI::IsMember({"json", "table"}));

  StatsArgs st;
  auto* statsc = app.add_subcommand("stats", "sentence, token and entity counts");
  statsc->add_option("--corpus", st.corpus, "CoNLL corpus")->required();
  statsc->add_option("--schema", st.schema, "io or iob2");
  statsc->add_option("--format", st.format, "json or table")->check(CLI::IsMember({"json", "table"}));

  SampleArgs sa;
  auto* samplec = app.add_subcommand("sample", "draw k sentences with a seed");
  samplec->add_option("--corpus", sa.corpus, "CoNLL corpus")->required();
  samplec->add_option("--k", sa.k, "number of sentences");
  samplec->add_option("--seed", sa.seed, "seed");
  samplec->add_option("--schema", sa.schema, "io or iob2");
  samplec->add_option("--out", sa.out, "output file (default stdout)");

  GenerateArgs ga;
  auto* genc = app.add_subcommand("generate", "write the synthetic gazetteer corpus");
  genc->add_option("--sentences", ga.opt.sentences, "sentence count");
  genc->add_option("--lexicon", ga.opt.lexicon_size, "lexicon size");
  genc->add_option("--seed", ga.opt.seed, "generator seed");
  genc->add_option("--out", ga.out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*expand) return cmd_expand(ex);
    if (*runc) return cmd_run(run);
    if (*evalc) return cmd_eval(ev);
    if (*statsc) return cmd_stats(st);
    if (*samplec) return cmd_sample(sa);
    if (*genc) return cmd_generate(ga);
  } catch (const peter::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
