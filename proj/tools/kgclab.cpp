// kgclab command-line front end.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "kgclab/aggregator.hpp"
#include "kgclab/eval.hpp"
#include "kgclab/io.hpp"
#include "kgclab/parallel.hpp"
#include "kgclab/patterns.hpp"
#include "kgclab/perturb.hpp"
#include "kgclab/rules.hpp"
#include "kgclab/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace kgclab;

namespace {

constexpr const char* kVersion = "kgclab 0.1.0";

std::string sha256_file(const fs::path& p) {
  std::string data = read_file(p);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  std::ostringstream out;
  for (unsigned i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return out.str();
}

// Records what a run read and wrote, then writes manifest.json.
class RunRecord {
 public:
  RunRecord(std::string command, std::vector<std::string> argv)
      : command_(std::move(command)), argv_(std::move(argv)) {}

  void input(const fs::path& p) {
    if (fs::is_directory(p)) {
      for (const char* f : {"train.txt", "valid.txt", "test.txt"})
        if (fs::exists(p / f)) add(inputs_, p / f);
    } else {
      add(inputs_, p);
    }
  }
  void output(const fs::path& p) {
    if (fs::is_directory(p)) {
      for (const char* f : {"train.txt", "valid.txt", "test.txt"})
        if (fs::exists(p / f)) add(outputs_, p / f);
    } else {
      add(outputs_, p);
    }
  }
  void seed(std::uint64_t s) { seed_ = s; }

  // Next to `primary`: <dir>/manifest.json or <file>.manifest.json.
  void write(const fs::path& primary, const CLI::App& sub) const {
    json config = json::object();
    for (const CLI::Option* opt : sub.get_options()) {
      std::string name = opt->get_single_name();
      if (name.empty() || name == "help") continue;
      std::string value;
      if (opt->count() > 0) {
        auto r = opt->reduced_results();
        for (std::size_t i = 0; i < r.size(); ++i) value += (i ? "," : "") + r[i];
        if (opt->get_type_size() == 0 && value.empty()) value = "true";
      } else {
        value = opt->get_default_str();
      }
      config[name] = value;
    }
    json m = {{"tool", kVersion},
              {"command", command_},
              {"argv", argv_},
              {"config", config},
              {"seed", seed_ ? json(*seed_) : json(nullptr)},
              {"inputs", inputs_},
              {"outputs", outputs_}};
    fs::path target = fs::is_directory(primary) ? primary / "manifest.json"
                                                : fs::path(primary.string() + ".manifest.json");
    write_file_atomic(target, m.dump(2) + "\n");
  }

 private:
  static void add(json& list, const fs::path& p) {
    list.push_back({{"path", p.lexically_normal().string()}, {"sha256", sha256_file(p)}});
  }

  std::string command_;
  std::vector<std::string> argv_;
  std::optional<std::uint64_t> seed_;
  json inputs_ = json::array();
  json outputs_ = json::array();
};

// ---------------------------------------------------------------------------
// Shared option groups

struct RuleOptions {
  std::string file;
  bool lenient = false;
  bool anyburl = false;
  MineConfig mine;

  void add(CLI::App* app) {
    app->add_option("--rules", file, "Rule file; mined inline when omitted");
    app->add_flag("--lenient", lenient, "Skip malformed rule lines instead of failing");
    app->add_flag("--anyburl", anyburl, "Rule file has AnyBURL column order");
    add_mining(app);
  }
  void add_mining(CLI::App* app) {
    app->add_option("--max-len", mine.max_len, "Longest cyclic rule body")
        ->check(CLI::Range(1, 3))
        ->capture_default_str();
    app->add_option("--min-support", mine.min_support, "Minimum support")->capture_default_str();
    app->add_option("--min-conf", mine.min_conf, "Minimum confidence")->capture_default_str();
    app->add_option("--samples", mine.samples, "Start triples to sample (0 = all)")->capture_default_str();
    app->add_option("--max-branching", mine.max_branching, "Per-node expansion cap (0 = none)")
        ->capture_default_str();
    app->add_option("--confidence-offset", mine.confidence_offset, "Pessimistic confidence offset")
        ->capture_default_str();
  }

  RuleSet load(const Split& split, std::uint64_t seed, RunRecord& rec) {
    if (file.empty()) {
      MineConfig cfg = mine;
      cfg.seed = seed;
      return mine_rules(split.train, cfg);
    }
    rec.input(file);
    RuleParseOptions po;
    po.strict = !lenient;
    po.anyburl_columns = anyburl;
    RuleParseReport rep;
    auto rs = load_rules(file, split.vocab, po, &rep);
    spdlog::info("rules: {} parsed, {} unsupported, {} unknown labels, {} malformed", rep.parsed,
                 rep.unsupported, rep.unknown_labels, rep.malformed);
    return rs;
  }
};

FeatureIndex make_index(const std::string& spec, const RuleSet& rules, const Vocabulary& vocab) {
  const std::size_t P = vocab.num_relations();
  if (spec == "none") return FeatureIndex::none(rules, P);
  if (spec == "all") return FeatureIndex::all(rules, P, false);
  if (spec == "shared") return FeatureIndex::all(rules, P, true);
  std::vector<ExistenceSpec> specs;
  std::stringstream in(spec);
  std::string part;
  while (std::getline(in, part, ',')) specs.push_back(parse_existence_spec(part, vocab));
  if (specs.empty()) throw ConfigError("empty --features value");
  return FeatureIndex::single(rules, P, std::move(specs));
}

struct ModelOptions {
  std::string features = "none";
  std::string model_file;
  TrainConfig train;

  void add(CLI::App* app, bool with_model_file) {
    app->add_option("--features", features, "none | all | shared | single:<rel>:<head|tail>:<slot>[:<rel>],...")
        ->capture_default_str();
    if (with_model_file) app->add_option("--model", model_file, "Checkpoint; trained inline when omitted");
    app->add_option("--epochs", train.epochs, "Gradient descent epochs")->capture_default_str();
    app->add_option("--lr", train.learning_rate, "Learning rate")->capture_default_str();
    app->add_option("--l2", train.l2, "L2 penalty")->capture_default_str();
    app->add_option("--negatives", train.negatives_per_positive, "Negatives per positive")
        ->capture_default_str();
  }
};

struct ScorerOptions {
  std::string kind = "aggregator";
  std::string mode = "oot";
  double epsilon = 0.1;
  RuleOptions rules;
  ModelOptions model;

  void add(CLI::App* app) {
    app->add_option("--scorer", kind, "aggregator | penalty")
        ->check(CLI::IsMember({"aggregator", "penalty"}))
        ->capture_default_str();
    app->add_option("--mode", mode, "Penalty pattern: oot | ool")
        ->check(CLI::IsMember({"oot", "ool"}))
        ->capture_default_str();
    app->add_option("--epsilon", epsilon, "Penalty noise width")->capture_default_str();
    rules.add(app);
    model.add(app, true);
  }
};

// Holds whatever the chosen scorer refers to; filled in place because the
// aggregator keeps pointers to the rules and index.
struct BuiltScorer {
  RuleSet rules;
  std::optional<FeatureIndex> index;
  std::unique_ptr<Scorer> scorer;
};

void build_scorer(BuiltScorer& b, ScorerOptions& o, const Split& split, std::uint64_t seed,
                  RunRecord& rec) {
  if (o.kind == "penalty") {
    b.scorer = std::make_unique<PenaltyScorer>(
        PenaltyScorerConfig{parse_penalty_mode(o.mode), o.epsilon, seed}, split.train);
    return;
  }
  b.rules = o.rules.load(split, seed, rec);
  b.index = make_index(o.model.features, b.rules, split.vocab);
  LinearModel m;
  if (!o.model.model_file.empty()) {
    rec.input(o.model.model_file);
    m = load_model(o.model.model_file, *b.index, b.rules, split.vocab);
  } else {
    TrainConfig tc = o.model.train;
    tc.seed = seed;
    m = train(split.train, b.rules, *b.index, tc);
  }
  b.scorer = std::make_unique<AggregatorScorer>(b.rules, *b.index, std::move(m));
}

Split load_data(const std::string& dir, RunRecord& rec) {
  if (!fs::is_directory(dir)) throw IoError("data directory not found: " + dir);
  rec.input(dir);
  return load_split(dir);
}

void emit(const std::string& out, const std::string& content, RunRecord& rec, const CLI::App& sub) {
  if (out.empty()) return;
  write_file_atomic(out, content);
  rec.output(out);
  rec.write(out, sub);
}

std::string joint_line(const MetricTable& t) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "Joint MRR %.3f (Head %.3f, Tail %.3f, n=%zu)", t.joint().mrr(),
                t.direction(Direction::Head).mrr(), t.direction(Direction::Tail).mrr(), t.joint().n);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge graph completion laboratory: rules, existence features, negative patterns"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  app.set_config("--config", "", "key=value file; [section] or <command>.<key> for command options");
  app.set_version_flag("--version", kVersion);
  std::size_t threads = 0;
  bool verbose = false, quiet = false;
  app.add_option("--threads", threads, "Worker threads (default: KGC_THREADS or hardware)")
      ->envname("KGC_THREADS");
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Errors only");

  std::vector<std::string> args(argv, argv + argc);
  std::uint64_t seed = 42;
  std::string data, out;
  std::function<void(RunRecord&)> run;
  CLI::App* chosen = nullptr;

  // synth ------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Write a synthetic benchmark split");
  std::string kind;
  ZooConfig zoo;
  UniConfig uni;
  PairDisjointConfig pd;
  synth->add_option("kind", kind, "zoo | uni | pairdisjoint")
      ->required()
      ->check(CLI::IsMember({"zoo", "uni", "pairdisjoint"}));
  synth->add_option("--out", out, "Target directory")->required();
  synth->add_option("--students", zoo.n_students, "zoo: number of students")->capture_default_str();
  synth->add_option("--groups", uni.n_groups, "uni: number of groups")->capture_default_str();
  synth->add_option("--per-group", uni.k_students, "uni: answered students per group")->capture_default_str();
  synth->add_option("--entities", pd.n_entities, "pairdisjoint: entities")->capture_default_str();
  synth->add_option("--relations", pd.n_relations, "pairdisjoint: relations")->capture_default_str();
  synth->add_option("--triples", pd.n_train, "pairdisjoint: train triples")->capture_default_str();
  synth->add_option("--test", pd.n_test, "pairdisjoint: test triples")->capture_default_str();
  synth->add_option("--seed", pd.seed, "pairdisjoint: seed")->capture_default_str();
  synth->callback([&] {
    chosen = synth;
    run = [&](RunRecord& rec) {
      Split s = kind == "zoo" ? gen_zoo(zoo) : kind == "uni" ? gen_uni(uni) : gen_pair_disjoint(pd);
      if (kind == "pairdisjoint") rec.seed(pd.seed);
      write_split(out, s);
      rec.output(out);
      rec.write(out, *synth);
      std::printf("wrote %zu train, %zu valid, %zu test triples to %s\n", s.train.size(), s.valid.size(),
                  s.test.size(), out.c_str());
    };
  });

  // mine -------------------------------------------------------------------
  auto* mine = app.add_subcommand("mine", "Mine rules from a split's train graph");
  RuleOptions mine_opts;
  mine->add_option("data", data, "Split directory")->required();
  mine->add_option("--out", out, "Rule file")->required();
  mine->add_option("--seed", seed, "Seed")->capture_default_str();
  mine->add_flag("--no-constant", [&](std::int64_t) { mine_opts.mine.constant_rules = false; },
                 "Skip constant rules");
  mine_opts.add_mining(mine);
  mine->callback([&] {
    chosen = mine;
    run = [&](RunRecord& rec) {
      rec.seed(seed);
      Split s = load_data(data, rec);
      MineConfig cfg = mine_opts.mine;
      cfg.seed = seed;
      auto rs = mine_rules(s.train, cfg);
      emit(out, serialize_rules(rs, s.vocab), rec, *mine);
      std::printf("mined %zu rules\n", rs.size());
    };
  });

  // convert-rules ----------------------------------------------------------
  auto* convert = app.add_subcommand("convert-rules", "Read an external rule file and rewrite it");
  std::string rules_in;
  bool conv_lenient = false, conv_anyburl = false;
  convert->add_option("rules", rules_in, "External rule file")->required();
  convert->add_option("--data", data, "Split directory supplying the vocabulary")->required();
  convert->add_option("--out", out, "Rewritten rule file");
  convert->add_flag("--lenient", conv_lenient, "Skip malformed lines");
  convert->add_flag("--anyburl", conv_anyburl, "AnyBURL column order");
  convert->callback([&] {
    chosen = convert;
    run = [&](RunRecord& rec) {
      Split s = load_data(data, rec);
      rec.input(rules_in);
      RuleParseOptions po;
      po.strict = !conv_lenient;
      po.anyburl_columns = conv_anyburl;
      RuleParseReport rep;
      auto rs = load_rules(rules_in, s.vocab, po, &rep);
      json j = {{"parsed", rep.parsed},
                {"unsupported", rep.unsupported},
                {"unknown_labels", rep.unknown_labels},
                {"malformed", rep.malformed}};
      std::printf("%s\n", j.dump(2).c_str());
      emit(out, serialize_rules(rs, s.vocab), rec, *convert);
    };
  });

  // train ------------------------------------------------------------------
  auto* trn = app.add_subcommand("train", "Fit the logistic rule aggregator");
  RuleOptions train_rules;
  ModelOptions train_model;
  trn->add_option("data", data, "Split directory")->required();
  trn->add_option("--out", out, "Checkpoint file")->required();
  trn->add_option("--seed", seed, "Seed for mining and negative sampling")->capture_default_str();
  train_rules.add(trn);
  train_model.add(trn, false);
  trn->callback([&] {
    chosen = trn;
    run = [&](RunRecord& rec) {
      rec.seed(seed);
      Split s = load_data(data, rec);
      auto rs = train_rules.load(s, seed, rec);
      auto idx = make_index(train_model.features, rs, s.vocab);
      TrainConfig tc = train_model.train;
      tc.seed = seed;
      std::vector<double> history;
      auto m = train(s.train, rs, idx, tc, &history);
      emit(out, serialize_model(m, idx, rs, s.vocab), rec, *trn);
      std::printf("trained %zu rule-feature and %zu existence weights; final loss %.6f\n", m.w.size(), m.beta.size(),
                  history.empty() ? 0.0 : history.back());
    };
  });

  // eval -------------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "Filtered ranking evaluation on the test split");
  ScorerOptions ev_scorer;
  bool posthoc = false, directed = false;
  std::string ties = "average", dump;
  ev->add_option("data", data, "Split directory")->required();
  ev->add_option("--out", out, "Metric table JSON");
  ev->add_option("--seed", seed, "Seed")->capture_default_str();
  ev->add_flag("--posthoc", posthoc, "Drop candidates connected to the anchor in train");
  ev->add_flag("--directed", directed, "Post-hoc connectivity follows edge direction");
  ev->add_option("--ties", ties, "average | optimistic | pessimistic")->capture_default_str();
  ev->add_option("--dump", dump, "Write per-query ranks");
  ev_scorer.add(ev);
  ev->callback([&] {
    chosen = ev;
    run = [&](RunRecord& rec) {
      rec.seed(seed);
      Split s = load_data(data, rec);
      BuiltScorer b;
      build_scorer(b, ev_scorer, s, seed, rec);
      EvalOptions opt;
      opt.ties = parse_tie_mode(ties);
      opt.posthoc = posthoc;
      opt.posthoc_mode = directed ? Connectivity::Directed : Connectivity::Undirected;
      std::vector<RankedQuery> ranks;
      auto table = evaluate(*b.scorer, s, opt, &ranks);
      std::printf("%s%s\n", table.to_text().c_str(), joint_line(table).c_str());
      if (!dump.empty()) {
        write_file_atomic(dump, format_ranking_dump(ranks, s.vocab));
        rec.output(dump);
        if (out.empty()) rec.write(dump, *ev);
      }
      emit(out, table.to_json().dump(2) + "\n", rec, *ev);
    };
  });

  // filter -----------------------------------------------------------------
  auto* flt = app.add_subcommand("filter", "Compare rankings before and after post-hoc filtering");
  ScorerOptions flt_scorer;
  flt->add_option("data", data, "Split directory")->required();
  flt->add_option("--out", out, "Report JSON");
  flt->add_option("--seed", seed, "Seed")->capture_default_str();
  flt->add_flag("--directed", directed, "Connectivity follows edge direction");
  flt_scorer.add(flt);
  flt->callback([&] {
    chosen = flt;
    run = [&](RunRecord& rec) {
      rec.seed(seed);
      Split s = load_data(data, rec);
      BuiltScorer b;
      build_scorer(b, flt_scorer, s, seed, rec);
      std::vector<RankedQuery> before, after;
      auto t0 = evaluate(*b.scorer, s, {}, &before);
      EvalOptions opt;
      opt.posthoc = true;
      opt.posthoc_mode = directed ? Connectivity::Directed : Connectivity::Undirected;
      auto t1 = evaluate(*b.scorer, s, opt, &after);
      std::size_t removed = 0;
      for (const auto& r : after) removed += !r.rank.has_value();
      auto ool = check_ool(s, opt.posthoc_mode);
      std::printf("before: %s\nafter:  %s\ntruth removed in %zu queries; %zu of %zu test facts connected in train\n",
                  joint_line(t0).c_str(), joint_line(t1).c_str(), removed, ool.n_violations, ool.n_test_facts);
      json j = {{"before", t0.to_json()},
                {"after", t1.to_json()},
                {"truth_removed", removed},
                {"ool", to_json(ool, s.vocab)}};
      emit(out, j.dump(2) + "\n", rec, *flt);
    };
  });

  // detect -----------------------------------------------------------------
  auto* det = app.add_subcommand("detect", "Report OOT functionality or OOL violations");
  bool want_oot = false, want_ool = false;
  double theta = 1.0;
  det->add_option("data", data, "Split directory")->required();
  det->add_option("--out", out, "Report JSON");
  auto* f_oot = det->add_flag("--oot", want_oot, "Per-relation functionality");
  auto* f_ool = det->add_flag("--ool", want_ool, "Test facts whose pair is connected in train");
  f_oot->excludes(f_ool);
  det->add_option("--theta", theta, "Functional fraction threshold")->capture_default_str();
  det->add_flag("--directed", directed, "OOL connectivity follows edge direction");
  det->callback([&] {
    chosen = det;
    if (!want_oot && !want_ool) throw CLI::RequiredError("--oot or --ool");
    run = [&](RunRecord& rec) {
      Split s = load_data(data, rec);
      json j = want_oot ? to_json(detect_oot(s.train, theta, &s.vocab))
                        : to_json(check_ool(s, directed ? Connectivity::Directed : Connectivity::Undirected),
                                  s.vocab);
      std::printf("%s\n", j.dump(2).c_str());
      emit(out, j.dump(2) + "\n", rec, *det);
    };
  });

  // perturb-add / perturb-del ---------------------------------------------
  std::string pattern = "oot", relation, direction = "tail";
  PerturbConfig pcfg;
  bool with_rank = false, with_cases = false;
  ScorerOptions pert_scorer;
  auto add_perturb = [&](const char* name, const char* help, bool is_add) {
    auto* p = app.add_subcommand(name, help);
    p->add_option("data", data, "Split directory")->required();
    p->add_option("--out", out, "Report JSON");
    p->add_option("--pattern", pattern, "oot | ool")->check(CLI::IsMember({"oot", "ool"}))->capture_default_str();
    p->add_option("--relation", relation, "Target relation (oot)");
    p->add_option("--direction", direction, "Query direction (ool)")
        ->check(CLI::IsMember({"head", "tail"}))
        ->capture_default_str();
    p->add_option("--tau", pcfg.tau, "Del-OOL base score threshold")->capture_default_str();
    p->add_option("--seed", seed, "Seed")->capture_default_str();
    p->add_option("--cases", pcfg.cases_per_fact, "Cases per test fact")->capture_default_str();
    p->add_option("--max-attempts", pcfg.max_attempts, "Sampling budget per draw")->capture_default_str();
    p->add_flag("--with-cases", with_cases, "Include every case in the report");
    if (is_add) p->add_flag("--rank", with_rank, "Also re-rank test queries on the perturbed graphs");
    pert_scorer.add(p);
    p->callback([&, p, is_add] {
      chosen = p;
      run = [&, p, is_add](RunRecord& rec) {
        rec.seed(seed);
        Split s = load_data(data, rec);
        BuiltScorer b;
        build_scorer(b, pert_scorer, s, seed, rec);
        pcfg.seed = seed;
        std::optional<RelationId> target;
        if (pattern == "oot") {
          if (relation.empty()) throw ConfigError("--relation is required with --pattern oot");
          target = s.vocab.relation(relation);
        }
        const Direction d = parse_direction(direction);
        PerturbationReport rep;
        if (pattern == "oot")
          rep = is_add ? run_add_oot(*b.scorer, s, *target, pcfg) : run_del_oot(*b.scorer, s, *target, pcfg);
        else
          rep = is_add ? run_add_ool(*b.scorer, s, d, pcfg) : run_del_ool(*b.scorer, s, d, pcfg);
        std::printf("%s", to_text(rep).c_str());
        json j = to_json(rep, s.vocab, with_cases);
        if (with_rank) {
          auto protocol = pattern == "oot" ? Protocol::AddOot : Protocol::AddOol;
          auto rr = rank_after_add(*b.scorer, s, protocol, target, pcfg);
          std::printf("original %s\nattack   %s\nrandom   %s\n", joint_line(rr.original).c_str(),
                      joint_line(rr.attack).c_str(), joint_line(rr.random).c_str());
          j["ranking"] = {{"original", rr.original.to_json()},
                          {"attack", rr.attack.to_json()},
                          {"random", rr.random.to_json()},
                          {"n_perturbed", rr.n_perturbed},
                          {"n_skipped", rr.n_skipped}};
        }
        emit(out, j.dump(2) + "\n", rec, *p);
      };
    });
  };
  add_perturb("perturb-add", "Add-fact attack with a random control", true);
  add_perturb("perturb-del", "Delete-fact attack with a random control", false);

  // ingest -----------------------------------------------------------------
  auto* ing = app.add_subcommand("ingest", "Turn a ranking dump into a metric table");
  std::string dump_in;
  ing->add_option("dump", dump_in, "Ranking dump (fact@H|T<TAB>rank)")->required();
  ing->add_option("--out", out, "Metric table JSON");
  ing->callback([&] {
    chosen = ing;
    run = [&](RunRecord& rec) {
      rec.input(dump_in);
      auto t = ingest_ranking_dump(read_file(dump_in), dump_in);
      std::printf("%s%s\n", t.to_text().c_str(), joint_line(t).c_str());
      emit(out, t.to_json().dump(2) + "\n", rec, *ing);
    };
  });

  // substitute -------------------------------------------------------------
  auto* sub = app.add_subcommand("substitute", "Joint MRR after replacing one cell");
  std::string table_in;
  double mrr = 0.0;
  sub->add_option("table", table_in, "Metric table JSON")->required();
  sub->add_option("--relation", relation, "Relation label")->required();
  sub->add_option("--direction", direction, "head | tail")->check(CLI::IsMember({"head", "tail"}))->required();
  sub->add_option("--mrr", mrr, "Replacement MRR")->required();
  sub->callback([&] {
    chosen = sub;
    run = [&](RunRecord& rec) {
      rec.input(table_in);
      auto t = MetricTable::from_json(json::parse(read_file(table_in)));
      double after = substitute_and_recompute(t, relation, parse_direction(direction), mrr);
      std::printf("joint %.3f -> %.3f\n", t.joint().mrr(), after);
    };
  });

  // compare ----------------------------------------------------------------
  auto* cmp = app.add_subcommand("compare", "Per-relation MRR relative to a reference table");
  std::vector<std::string> named;
  std::string reference;
  cmp->add_option("tables", named, "name=table.json ...")->required();
  cmp->add_option("--reference", reference, "Reference table name")->required();
  cmp->add_option("--direction", direction, "head | tail")->check(CLI::IsMember({"head", "tail"}))->capture_default_str();
  cmp->add_option("--out", out, "Report JSON");
  cmp->callback([&] {
    chosen = cmp;
    run = [&](RunRecord& rec) {
      std::vector<std::pair<std::string, MetricTable>> tables;
      for (const auto& nt : named) {
        auto eq = nt.find('=');
        if (eq == std::string::npos) throw ConfigError("expected name=path, got '" + nt + "'");
        std::string path = nt.substr(eq + 1);
        rec.input(path);
        tables.emplace_back(nt.substr(0, eq), MetricTable::from_json(json::parse(read_file(path))));
      }
      auto rows = relative_comparison(tables, reference, parse_direction(direction));
      json j = to_json(rows);
      std::printf("%s\n", j.dump(2).c_str());
      emit(out, j.dump(2) + "\n", rec, *cmp);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  spdlog::set_default_logger(spdlog::stderr_color_mt("kgclab"));
  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::err : spdlog::level::warn);
  if (threads > 0) set_default_threads(threads);

  try {
    RunRecord rec(chosen->get_name(), args);
    run(rec);
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const LookupError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const json::exception& e) {
    std::fprintf(stderr, "error: bad JSON input: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 70;
  }
  return 0;
}
