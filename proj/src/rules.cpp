#include "kgclab/rules.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "kgclab/io.hpp"
#include "kgclab/parallel.hpp"

namespace kgclab {

bool Rule::body_mentions(RelationId r) const {
  return std::any_of(body.begin(), body.end(), [r](const BodyAtom& a) { return a.relation == r; });
}

std::weak_ordering Rule::compare_shape(const Rule& o) const {
  if (auto c = kind <=> o.kind; c != 0) return c;
  if (auto c = head_relation <=> o.head_relation; c != 0) return c;
  if (kind == RuleKind::Constant) {
    if (auto c = head_constant <=> o.head_constant; c != 0) return c;
    if (auto c = body_constant <=> o.body_constant; c != 0) return c;
  }
  if (auto c = body.size() <=> o.body.size(); c != 0) return c;
  for (std::size_t i = 0; i < body.size(); ++i)
    if (auto c = body[i] <=> o.body[i]; c != 0) return c;
  return std::weak_ordering::equivalent;
}

RuleSet::RuleSet(std::vector<Rule> rules) : rules_(std::move(rules)) {
  for (std::uint32_t i = 0; i < rules_.size(); ++i) {
    auto r = rules_[i].head_relation;
    if (r >= by_relation_.size()) by_relation_.resize(r + 1);
    by_relation_[r].push_back(i);
  }
}

std::span<const std::uint32_t> RuleSet::for_relation(RelationId r) const {
  if (r >= by_relation_.size()) return {};
  return by_relation_[r];
}

namespace {

// Slot to bind when walking an atom from its already-bound end.
Slot walk_slot(const BodyAtom& atom, bool reversed) {
  return (atom.inverse != reversed) ? Slot::TailFixed : Slot::HeadFixed;
}

void sort_unique(std::vector<EntityId>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

// Entities reachable from `start` by walking `steps` atoms of the chain, in
// chain order or (reversed) from the Y end backwards.
std::vector<EntityId> reach(const GraphOverlay& g, std::span<const BodyAtom> body, EntityId start,
                            bool reversed, std::size_t steps, const std::optional<Triple>& exclude) {
  std::vector<EntityId> frontier{start};
  std::vector<EntityId> next;
  for (std::size_t i = 0; i < steps && !frontier.empty(); ++i) {
    const BodyAtom& atom = reversed ? body[body.size() - 1 - i] : body[i];
    const Slot slot = walk_slot(atom, reversed);
    next.clear();
    for (EntityId e : frontier)
      g.for_each_neighbor(atom.relation, e, slot, [&](EntityId n) { next.push_back(n); }, exclude);
    sort_unique(next);
    frontier.swap(next);
  }
  return frontier;
}

bool atom_holds(const GraphOverlay& g, const BodyAtom& atom, EntityId from, EntityId to,
                const std::optional<Triple>& exclude) {
  Triple t = atom.inverse ? Triple{to, atom.relation, from} : Triple{from, atom.relation, to};
  if (exclude && *exclude == t) return false;
  return g.contains(t);
}

}  // namespace

bool rule_fires(const Rule& rule, const Triple& triple, const GraphOverlay& graph,
                bool leave_one_out) {
  if (triple.relation != rule.head_relation || triple.head == triple.tail) return false;
  std::optional<Triple> exclude;
  if (leave_one_out) exclude = triple;

  if (rule.kind == RuleKind::Constant) {
    if (triple.tail != rule.head_constant || rule.body.empty()) return false;
    return atom_holds(graph, rule.body[0], triple.head, rule.body_constant, exclude);
  }

  const auto& body = rule.body;
  if (body.empty()) return false;
  auto frontier = reach(graph, body, triple.head, false, body.size() - 1, exclude);
  for (EntityId a : frontier)
    if (atom_holds(graph, body.back(), a, triple.tail, exclude)) return true;
  return false;
}

std::vector<EntityId> rule_predictions(const Rule& rule, Direction direction, EntityId anchor,
                                       const GraphOverlay& graph) {
  std::vector<EntityId> out;
  if (rule.body.empty()) return out;

  if (rule.kind == RuleKind::Constant) {
    const BodyAtom& atom = rule.body[0];
    if (direction == Direction::Tail) {
      if (anchor != rule.head_constant &&
          atom_holds(graph, atom, anchor, rule.body_constant, std::nullopt))
        out.push_back(rule.head_constant);
    } else if (anchor == rule.head_constant) {
      // X with b(X,c): walk the atom backwards from the constant.
      out = graph.neighbors(atom.relation, rule.body_constant, walk_slot(atom, true));
      sort_unique(out);
    }
  } else {
    const bool reversed = direction == Direction::Head;
    out = reach(graph, rule.body, anchor, reversed, rule.body.size(), std::nullopt);
  }
  std::erase(out, anchor);
  return out;
}

GroundingStats compute_stats(const Rule& rule, const KnowledgeGraph& graph) {
  GroundingStats stats;
  GraphOverlay view(graph);
  const bool self_referential = rule.body_mentions(rule.head_relation);

  auto count = [&](EntityId x, EntityId y) {
    if (x == y) return;
    Triple t{x, rule.head_relation, y};
    const bool known = graph.contains(t);
    if (known && self_referential && !rule_fires(rule, t, view, true)) return;
    ++stats.body_groundings;
    if (known) ++stats.support;
  };

  if (rule.body.empty()) return stats;
  if (rule.kind == RuleKind::Constant) {
    for (EntityId x : rule_predictions(rule, Direction::Head, rule.head_constant, view))
      count(x, rule.head_constant);
    return stats;
  }

  // X ranges over entities that can start the chain.
  const BodyAtom& first = rule.body.front();
  std::vector<EntityId> starts;
  for (auto idx : graph.with_relation(first.relation)) {
    const Triple& t = graph.triple(idx);
    starts.push_back(first.inverse ? t.tail : t.head);
  }
  sort_unique(starts);
  for (EntityId x : starts)
    for (EntityId y : reach(view, rule.body, x, false, rule.body.size(), std::nullopt)) count(x, y);
  return stats;
}

namespace {

struct PathSearch {
  const KnowledgeGraph& graph;
  const MineConfig& cfg;
  Triple start;
  std::mt19937_64 rng;
  std::vector<Rule>& out;
  std::vector<BodyAtom> path;
  std::vector<EntityId> visited;

  void emit_closing(EntityId cur) {
    const EntityId y = start.tail;
    auto close = [&](EntityId h, EntityId t, bool inverse) {
      for (RelationId r : graph.relations_between(h, t)) {
        if (Triple{h, r, t} == start) continue;
        Rule rule;
        rule.kind = RuleKind::Cyclic;
        rule.head_relation = start.relation;
        rule.body = path;
        rule.body.push_back({r, inverse});
        out.push_back(std::move(rule));
      }
    };
    close(cur, y, false);
    if (cur != y) close(y, cur, true);
  }

  void dfs(EntityId cur) {
    emit_closing(cur);
    if (static_cast<int>(path.size()) + 1 >= cfg.max_len) return;

    auto incident = graph.incident(cur);
    std::vector<std::uint32_t> picks(incident.begin(), incident.end());
    if (cfg.max_branching > 0 && picks.size() > cfg.max_branching) {
      std::shuffle(picks.begin(), picks.end(), rng);
      picks.resize(cfg.max_branching);
      std::sort(picks.begin(), picks.end());
    }
    for (auto idx : picks) {
      const Triple& t = graph.triple(idx);
      if (t == start || t.head == t.tail) continue;
      const bool inverse = t.tail == cur;
      const EntityId other = inverse ? t.head : t.tail;
      if (other == start.tail || std::find(visited.begin(), visited.end(), other) != visited.end())
        continue;
      path.push_back({t.relation, inverse});
      visited.push_back(other);
      dfs(other);
      visited.pop_back();
      path.pop_back();
    }
  }
};

void constant_candidates(const KnowledgeGraph& graph, const Triple& start, std::vector<Rule>& out) {
  for (auto idx : graph.incident(start.head)) {
    const Triple& t = graph.triple(idx);
    if (t == start || t.head == t.tail) continue;
    const bool inverse = t.tail == start.head;
    Rule rule;
    rule.kind = RuleKind::Constant;
    rule.head_relation = start.relation;
    rule.head_constant = start.tail;
    rule.body_constant = inverse ? t.head : t.tail;
    rule.body = {{t.relation, inverse}};
    out.push_back(std::move(rule));
  }
}

}  // namespace

RuleSet mine_rules(const KnowledgeGraph& graph, const MineConfig& cfg) {
  if (cfg.max_len < 1 || cfg.max_len > 3) throw ConfigError("max_len must be in 1..3");
  if (cfg.min_conf < 0.0 || cfg.min_conf > 1.0) throw ConfigError("min_conf must be in [0,1]");
  if (graph.empty()) return RuleSet{};

  std::vector<std::uint32_t> starts(graph.size());
  for (std::uint32_t i = 0; i < starts.size(); ++i) starts[i] = i;
  if (cfg.samples > 0 && cfg.samples < starts.size()) {
    std::mt19937_64 rng(cfg.seed);
    std::shuffle(starts.begin(), starts.end(), rng);
    starts.resize(cfg.samples);
    std::sort(starts.begin(), starts.end());
  }

  // Path sampling per start triple; per-item seeds keep this independent of
  // scheduling.
  std::vector<std::vector<Rule>> found(starts.size());
  parallel_for(starts.size(), [&](std::size_t i) {
    const Triple& start = graph.triple(starts[i]);
    if (start.head == start.tail) return;
    PathSearch search{graph, cfg, start, std::mt19937_64(mix_seed(cfg.seed, starts[i])), found[i], {}, {start.head}};
    search.dfs(start.head);
    if (cfg.constant_rules) constant_candidates(graph, start, found[i]);
  });

  std::set<Rule, RuleLess> unique;
  for (auto& v : found)
    for (auto& r : v) unique.insert(std::move(r));
  std::vector<Rule> candidates(unique.begin(), unique.end());

  parallel_for(candidates.size(), [&](std::size_t i) {
    auto s = compute_stats(candidates[i], graph);
    candidates[i].support = s.support;
    candidates[i].body_groundings = s.body_groundings;
    const double denom = static_cast<double>(s.body_groundings) + cfg.confidence_offset;
    candidates[i].confidence = denom > 0 ? static_cast<double>(s.support) / denom : 0.0;
  });

  std::erase_if(candidates, [&](const Rule& r) {
    return r.support < std::max<std::uint64_t>(cfg.min_support, 1) || r.confidence < cfg.min_conf;
  });
  std::stable_sort(candidates.begin(), candidates.end(), [](const Rule& a, const Rule& b) {
    if (a.head_relation != b.head_relation) return a.head_relation < b.head_relation;
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.compare_shape(b) < 0;
  });
  return RuleSet(std::move(candidates));
}

// ---------------------------------------------------------------------------
// Text format

namespace {

const char* const kChainVars[4][4] = {
    {"X", "Y", "", ""}, {"X", "Y", "", ""}, {"X", "A", "Y", ""}, {"X", "A", "B", "Y"}};

bool is_variable(std::string_view s) {
  return s == "X" || s == "Y" || s == "A" || s == "B" || s == "C";
}

std::string atom_text(const std::string& rel, const std::string& a, const std::string& b) {
  return rel + "(" + a + "," + b + ")";
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

struct ParsedAtom {
  std::string relation;
  std::string arg0;
  std::string arg1;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

// Parses "r(a,b)" atoms separated by commas. Returns false on bad syntax.
bool parse_atoms(std::string_view s, std::vector<ParsedAtom>& out) {
  s = trim(s);
  while (!s.empty()) {
    auto open = s.find('(');
    if (open == std::string_view::npos || open == 0) return false;
    // The closing paren is the first ')' followed by end or a separating comma.
    std::size_t close = std::string_view::npos;
    for (auto p = s.find(')', open); p != std::string_view::npos; p = s.find(')', p + 1)) {
      auto rest = trim(s.substr(p + 1));
      if (rest.empty() || rest.front() == ',') {
        close = p;
        break;
      }
    }
    if (close == std::string_view::npos) return false;
    auto args = s.substr(open + 1, close - open - 1);
    auto comma = args.find(',');
    if (comma == std::string_view::npos || args.find(',', comma + 1) != std::string_view::npos)
      return false;
    ParsedAtom atom{std::string(trim(s.substr(0, open))), std::string(trim(args.substr(0, comma))),
                    std::string(trim(args.substr(comma + 1)))};
    if (atom.relation.empty() || atom.arg0.empty() || atom.arg1.empty()) return false;
    out.push_back(std::move(atom));
    s = trim(s.substr(close + 1));
    if (!s.empty()) {
      if (s.front() != ',') return false;
      s = trim(s.substr(1));
      if (s.empty()) return false;
    }
  }
  return true;
}

enum class LineResult { Ok, Malformed, Unsupported, UnknownLabel };

LineResult parse_rule_text(std::string_view text, const Vocabulary& vocab, Rule& rule,
                           std::string& why) {
  auto arrow = text.find("<=");
  if (arrow == std::string_view::npos) {
    why = "missing '<='";
    return LineResult::Malformed;
  }
  std::vector<ParsedAtom> head;
  std::vector<ParsedAtom> body;
  if (!parse_atoms(text.substr(0, arrow), head) || head.size() != 1) {
    why = "bad head atom";
    return LineResult::Malformed;
  }
  if (!parse_atoms(text.substr(arrow + 2), body)) {
    why = "bad body atoms";
    return LineResult::Malformed;
  }
  if (body.empty() || body.size() > 3) return LineResult::Unsupported;

  auto rel = [&](const std::string& label) { return vocab.relations.find(label); };
  auto ent = [&](const std::string& label) { return vocab.entities.find(label); };

  const ParsedAtom& h = head[0];
  auto head_rel = rel(h.relation);

  if (h.arg0 == "X" && h.arg1 == "Y") {
    rule.kind = RuleKind::Cyclic;
    std::string cur = "X";
    std::vector<std::string> used{"X"};
    std::vector<std::pair<std::string, bool>> atoms;
    for (std::size_t i = 0; i < body.size(); ++i) {
      const auto& a = body[i];
      if (!is_variable(a.arg0) || !is_variable(a.arg1)) return LineResult::Unsupported;
      std::string next;
      bool inverse;
      if (a.arg0 == cur) {
        next = a.arg1;
        inverse = false;
      } else if (a.arg1 == cur) {
        next = a.arg0;
        inverse = true;
      } else {
        return LineResult::Unsupported;
      }
      const bool last = i + 1 == body.size();
      if (last != (next == "Y")) return LineResult::Unsupported;
      if (std::find(used.begin(), used.end(), next) != used.end()) return LineResult::Unsupported;
      used.push_back(next);
      atoms.emplace_back(a.relation, inverse);
      cur = next;
    }
    if (!head_rel) return LineResult::UnknownLabel;
    rule.head_relation = *head_rel;
    rule.body.clear();
    for (auto& [label, inverse] : atoms) {
      auto r = rel(label);
      if (!r) return LineResult::UnknownLabel;
      rule.body.push_back({*r, inverse});
    }
    return LineResult::Ok;
  }

  if (h.arg0 == "X" && !is_variable(h.arg1)) {
    if (body.size() != 1) return LineResult::Unsupported;
    const auto& a = body[0];
    bool inverse;
    std::string constant;
    if (a.arg0 == "X" && !is_variable(a.arg1)) {
      inverse = false;
      constant = a.arg1;
    } else if (a.arg1 == "X" && !is_variable(a.arg0)) {
      inverse = true;
      constant = a.arg0;
    } else {
      return LineResult::Unsupported;
    }
    auto hc = ent(h.arg1);
    auto bc = ent(constant);
    auto br = rel(a.relation);
    if (!head_rel || !hc || !bc || !br) return LineResult::UnknownLabel;
    rule.kind = RuleKind::Constant;
    rule.head_relation = *head_rel;
    rule.head_constant = *hc;
    rule.body_constant = *bc;
    rule.body = {{*br, inverse}};
    return LineResult::Ok;
  }
  return LineResult::Unsupported;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  if constexpr (std::is_floating_point_v<T>) {
    std::string tmp(s);
    char* end = nullptr;
    out = std::strtod(tmp.c_str(), &end);
    return end == tmp.c_str() + tmp.size();
  } else {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
  }
}

}  // namespace

std::string format_rule(const Rule& rule, const Vocabulary& vocab) {
  const auto& R = vocab.relations;
  const auto& E = vocab.entities;
  std::string out;
  if (rule.kind == RuleKind::Constant) {
    const auto& a = rule.body.at(0);
    const auto& c = E.label(rule.body_constant);
    out = atom_text(R.label(rule.head_relation), "X", E.label(rule.head_constant)) + " <= " +
          (a.inverse ? atom_text(R.label(a.relation), c, "X") : atom_text(R.label(a.relation), "X", c));
    return out;
  }
  const auto n = std::min<std::size_t>(rule.body.size(), 3);
  out = atom_text(R.label(rule.head_relation), "X", "Y") + " <=";
  for (std::size_t i = 0; i < rule.body.size(); ++i) {
    const auto& a = rule.body[i];
    std::string from = kChainVars[n][i];
    std::string to = kChainVars[n][i + 1];
    out += i == 0 ? " " : ", ";
    out += a.inverse ? atom_text(R.label(a.relation), to, from) : atom_text(R.label(a.relation), from, to);
  }
  return out;
}

RuleSet parse_rules(const std::string& text, const Vocabulary& vocab, const RuleParseOptions& opts,
                    RuleParseReport* report, const std::string& source) {
  RuleParseReport local;
  std::vector<Rule> rules;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;

  auto malformed = [&](const std::string& why) {
    if (opts.strict) throw ParseError(source, lineno, why);
    ++local.malformed;
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;

    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (int i = 0; i < 3; ++i) {
      auto tab = rest.find('\t');
      if (tab == std::string_view::npos) break;
      fields.push_back(rest.substr(0, tab));
      rest.remove_prefix(tab + 1);
    }
    if (fields.size() != 3) {
      malformed("expected support<TAB>body_groundings<TAB>confidence<TAB>rule");
      continue;
    }
    fields.push_back(rest);

    Rule rule;
    std::uint64_t first = 0, second = 0;
    if (!parse_number(fields[0], first) || !parse_number(fields[1], second) ||
        !parse_number(fields[2], rule.confidence)) {
      malformed("non-numeric rule statistics");
      continue;
    }
    rule.support = opts.anyburl_columns ? second : first;
    rule.body_groundings = opts.anyburl_columns ? first : second;

    std::string why;
    switch (parse_rule_text(fields[3], vocab, rule, why)) {
      case LineResult::Ok:
        rules.push_back(std::move(rule));
        ++local.parsed;
        break;
      case LineResult::Malformed:
        malformed(why);
        break;
      case LineResult::Unsupported:
        ++local.unsupported;
        break;
      case LineResult::UnknownLabel:
        ++local.unknown_labels;
        break;
    }
  }
  if (report) *report = local;
  return RuleSet(std::move(rules));
}

RuleSet load_rules(const std::filesystem::path& path, const Vocabulary& vocab,
                   const RuleParseOptions& opts, RuleParseReport* report) {
  return parse_rules(read_file(path), vocab, opts, report, path.string());
}

std::string serialize_rules(const RuleSet& rules, const Vocabulary& vocab) {
  std::string out;
  for (const auto& r : rules.rules()) {
    out += std::to_string(r.support);
    out += '\t';
    out += std::to_string(r.body_groundings);
    out += '\t';
    out += format_double(r.confidence);
    out += '\t';
    out += format_rule(r, vocab);
    out += '\n';
  }
  return out;
}

void write_rules(const std::filesystem::path& path, const RuleSet& rules, const Vocabulary& vocab) {
  write_file_atomic(path, serialize_rules(rules, vocab));
}

}  // namespace kgclab
