#include "kgclab/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "kgclab/parallel.hpp"

namespace kgclab {

KnownAnswers::KnownAnswers(std::span<const Triple> triples) {
  for (const auto& t : triples) add(t);
  finalize();
}

KnownAnswers::KnownAnswers(const Split& split) {
  for (const auto& t : split.train.triples()) add(t);
  for (const auto& t : split.valid) add(t);
  for (const auto& t : split.test) add(t);
  finalize();
}

void KnownAnswers::add(const Triple& t) {
  map_[key(Direction::Tail, t.relation, t.head)].push_back(t.tail);
  map_[key(Direction::Head, t.relation, t.tail)].push_back(t.head);
}

void KnownAnswers::finalize() {
  for (auto& [k, v] : map_) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
}

std::span<const EntityId> KnownAnswers::answers(const Query& q) const {
  auto it = map_.find(key(q.direction, q.relation, q.anchor));
  if (it == map_.end()) return {};
  return it->second;
}

bool KnownAnswers::is_answer(const Query& q, EntityId e) const {
  auto a = answers(q);
  return std::binary_search(a.begin(), a.end(), e);
}

TieMode parse_tie_mode(const std::string& s) {
  if (s == "average") return TieMode::Average;
  if (s == "optimistic") return TieMode::Optimistic;
  if (s == "pessimistic") return TieMode::Pessimistic;
  throw ConfigError("unknown tie mode '" + s + "' (expected average, optimistic or pessimistic)");
}

double tie_rank(std::size_t higher, std::size_t tied, TieMode mode) {
  switch (mode) {
    case TieMode::Optimistic: return 1.0 + higher;
    case TieMode::Pessimistic: return 1.0 + higher + tied;
    case TieMode::Average: break;
  }
  return 1.0 + higher + tied / 2.0;
}

Ranking rank_query(const Scorer& scorer, const Query& query, const GraphOverlay& graph,
                   const KnownAnswers& known, const EvalOptions& opts, bool keep_candidates) {
  const std::size_t n = graph.base().num_entities();
  if (query.truth >= n || query.anchor >= n) throw DefectError("query entity out of range");
  std::vector<double> scores(n);
  scorer.score_all(query, graph, scores);

  Ranking out;
  out.query = query;
  const double truth_score = scores[query.truth];
  if (std::isnan(truth_score)) throw DefectError("scorer returned NaN for the true answer");

  // Filtered-out entities: other known answers, then post-hoc removals.
  std::vector<bool> removed(n, false);
  for (EntityId e : known.answers(query))
    if (e != query.truth && e < n) removed[e] = true;
  bool truth_removed = false;
  if (opts.posthoc) {
    for (std::size_t c = 0; c < n; ++c)
      if (graph.connected(static_cast<EntityId>(c), query.anchor, std::nullopt, opts.posthoc_mode)) {
        if (c == query.truth) truth_removed = true;
        removed[c] = true;
      }
  }

  std::size_t higher = 0, tied = 0;
  for (std::size_t c = 0; c < n; ++c) {
    if (removed[c] || c == query.truth) continue;
    if (scores[c] > truth_score) ++higher;
    else if (scores[c] == truth_score) ++tied;
  }
  if (!truth_removed) out.rank = tie_rank(higher, tied, opts.ties);

  if (keep_candidates) {
    for (std::size_t c = 0; c < n; ++c)
      if (!removed[c]) out.candidates.emplace_back(static_cast<EntityId>(c), scores[c]);
    std::sort(out.candidates.begin(), out.candidates.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
  }
  return out;
}

void GroupStats::add(const Ranking& r) {
  ++n;
  if (!r.rank) return;
  sum_rr += 1.0 / *r.rank;
  if (*r.rank <= 1) hits1 += 1;
  if (*r.rank <= 3) hits3 += 1;
  if (*r.rank <= 10) hits10 += 1;
}

void GroupStats::merge(const GroupStats& o) {
  n += o.n;
  sum_rr += o.sum_rr;
  hits1 += o.hits1;
  hits3 += o.hits3;
  hits10 += o.hits10;
}

double GroupStats::hits(int k) const {
  if (n == 0) return 0.0;
  switch (k) {
    case 1: return hits1 / n;
    case 3: return hits3 / n;
    case 10: return hits10 / n;
    default: throw ConfigError("hits@k is tracked for k in {1,3,10} only");
  }
}

void MetricTable::add(const std::string& relation, const Ranking& r) {
  groups_[{relation, r.query.direction}].add(r);
}

void MetricTable::set(const std::string& relation, Direction d, GroupStats g) {
  groups_[{relation, d}] = g;
}

const GroupStats& MetricTable::group(const std::string& relation, Direction d) const {
  auto it = groups_.find({relation, d});
  if (it == groups_.end())
    throw LookupError("no metric cell for " + relation + " (" + to_string(d) + ")");
  return it->second;
}

bool MetricTable::has(const std::string& relation, Direction d) const {
  return groups_.contains({relation, d});
}

GroupStats MetricTable::direction(Direction d) const {
  GroupStats g;
  for (const auto& [k, v] : groups_)
    if (k.second == d) g.merge(v);
  return g;
}

GroupStats MetricTable::joint() const {
  GroupStats g;
  for (const auto& [k, v] : groups_) g.merge(v);
  return g;
}

namespace {

nlohmann::json stats_json(const GroupStats& g) {
  return {{"n_queries", g.n}, {"mrr", g.mrr()}, {"hits1", g.hits(1)}, {"hits3", g.hits(3)},
          {"hits10", g.hits(10)}};
}

}  // namespace

nlohmann::json MetricTable::to_json() const {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& [k, v] : groups_) {
    auto row = stats_json(v);
    row["relation"] = k.first;
    row["direction"] = to_string(k.second);
    groups.push_back(row);
  }
  return {{"groups", groups},
          {"tail", stats_json(direction(Direction::Tail))},
          {"head", stats_json(direction(Direction::Head))},
          {"joint", stats_json(joint())}};
}

MetricTable MetricTable::from_json(const nlohmann::json& j) {
  MetricTable t;
  if (!j.contains("groups") || !j["groups"].is_array())
    throw ConfigError("metric table JSON needs a 'groups' array");
  for (const auto& row : j["groups"]) {
    try {
      GroupStats g;
      g.n = row.at("n_queries").get<std::size_t>();
      const double n = static_cast<double>(g.n);
      g.sum_rr = row.at("mrr").get<double>() * n;
      g.hits1 = row.value("hits1", 0.0) * n;
      g.hits3 = row.value("hits3", 0.0) * n;
      g.hits10 = row.value("hits10", 0.0) * n;
      t.set(row.at("relation").get<std::string>(),
            parse_direction(row.at("direction").get<std::string>()), g);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("bad metric table row: ") + e.what());
    }
  }
  return t;
}

std::string MetricTable::to_text() const {
  std::map<std::string, std::pair<GroupStats, GroupStats>> rows;  // tail, head
  for (const auto& [k, v] : groups_) {
    auto& r = rows[k.first];
    (k.second == Direction::Tail ? r.first : r.second) = v;
  }
  std::size_t width = 8;
  for (const auto& [name, r] : rows) width = std::max(width, name.size());

  std::string out;
  char buf[256];
  auto line = [&](const std::string& name, const GroupStats& t, const GroupStats& h) {
    GroupStats j = t;
    j.merge(h);
    std::snprintf(buf, sizeof buf, "%-*s  %7zu  %7.3f  %7zu  %7.3f  %7.3f\n", static_cast<int>(width),
                  name.c_str(), t.n, t.mrr(), h.n, h.mrr(), j.mrr());
    out += buf;
  };
  std::snprintf(buf, sizeof buf, "%-*s  %7s  %7s  %7s  %7s  %7s\n", static_cast<int>(width),
                "relation", "n (T)", "MRR (T)", "n (H)", "MRR (H)", "MRR");
  out += buf;
  for (const auto& [name, r] : rows) line(name, r.first, r.second);
  line("all", direction(Direction::Tail), direction(Direction::Head));
  return out;
}

MetricTable evaluate(const Scorer& scorer, const Split& split, const EvalOptions& opts,
                     std::vector<RankedQuery>* ranks) {
  GraphOverlay view(split.train);
  return evaluate(scorer, split, view, opts, ranks);
}

MetricTable evaluate(const Scorer& scorer, const Split& split, const GraphOverlay& graph,
                     const EvalOptions& opts, std::vector<RankedQuery>* ranks) {
  KnownAnswers known(split);
  std::vector<Query> queries;
  std::vector<std::size_t> fact_of;
  for (std::size_t i = 0; i < split.test.size(); ++i)
    for (Direction d : opts.directions) {
      queries.push_back(Query::from_triple(split.test[i], d));
      fact_of.push_back(i);
    }

  std::vector<Ranking> results(queries.size());
  parallel_for(queries.size(),
               [&](std::size_t i) { results[i] = rank_query(scorer, queries[i], graph, known, opts); });

  MetricTable table;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const Triple& fact = split.test[fact_of[i]];
    table.add(split.vocab.relations.label(fact.relation), results[i]);
    if (ranks) ranks->push_back({fact, queries[i].direction, results[i].rank});
  }
  return table;
}

double substitute_and_recompute(const MetricTable& table, const std::string& relation, Direction d,
                                double replacement_mrr) {
  if (!(replacement_mrr >= 0.0 && replacement_mrr <= 1.0))
    throw ConfigError("replacement MRR must lie in [0,1]");
  const GroupStats& cell = table.group(relation, d);
  GroupStats joint = table.joint();
  if (joint.n == 0) return 0.0;
  double sum = joint.sum_rr - cell.sum_rr + replacement_mrr * static_cast<double>(cell.n);
  return sum / static_cast<double>(joint.n);
}

std::vector<RelativeRow> relative_comparison(
    const std::vector<std::pair<std::string, MetricTable>>& tables, const std::string& reference,
    Direction d) {
  const MetricTable* ref = nullptr;
  for (const auto& [name, t] : tables)
    if (name == reference) ref = &t;
  if (!ref) throw LookupError("reference table '" + reference + "' not given");

  std::vector<RelativeRow> rows;
  for (const auto& [key, g] : ref->groups()) {
    if (key.second != d) continue;
    RelativeRow row;
    row.relation = key.first;
    row.n_queries = g.n;
    for (const auto& [name, t] : tables) {
      std::optional<double> ratio;
      if (t.has(key.first, d) && g.mrr() > 0) ratio = t.group(key.first, d).mrr() / g.mrr();
      row.ratios.emplace_back(name, ratio);
    }
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const RelativeRow& a, const RelativeRow& b) { return a.n_queries > b.n_queries; });
  return rows;
}

nlohmann::json to_json(const std::vector<RelativeRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json ratios = nlohmann::json::object();
    for (const auto& [name, v] : r.ratios) ratios[name] = v ? nlohmann::json(*v) : nlohmann::json();
    out.push_back({{"relation", r.relation}, {"n_queries", r.n_queries}, {"ratios", ratios}});
  }
  return out;
}

std::string format_ranking_dump(std::span<const RankedQuery> ranks, const Vocabulary& vocab) {
  std::string out;
  char buf[64];
  for (const auto& r : ranks) {
    out += vocab.format(r.fact);
    out += r.direction == Direction::Head ? "@H\t" : "@T\t";
    if (r.rank) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, *r.rank);
      out.append(buf, end);
    } else {
      out += "-";
    }
    out += "\n";
  }
  return out;
}

MetricTable ingest_ranking_dump(const std::string& text, const std::string& source) {
  MetricTable table;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.rfind('\t');
    auto at = line.rfind('@', tab);
    auto paren = line.find('(');
    if (tab == std::string::npos || at == std::string::npos || paren == std::string::npos || paren > at)
      throw ParseError(source, lineno, "expected relation(head,tail)@H|T<TAB>rank");
    std::string rel = line.substr(0, paren);
    std::string dir = line.substr(at + 1, tab - at - 1);
    std::string num = line.substr(tab + 1);
    Ranking r;
    if (dir == "H") r.query.direction = Direction::Head;
    else if (dir == "T") r.query.direction = Direction::Tail;
    else throw ParseError(source, lineno, "direction must be H or T");
    if (num != "-") {
      double v = 0;
      auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
      if (ec != std::errc() || ptr != num.data() + num.size() || !(v >= 1.0))
        throw ParseError(source, lineno, "bad rank '" + num + "'");
      r.rank = v;
    }
    table.add(rel, r);
  }
  return table;
}

}  // namespace kgclab
